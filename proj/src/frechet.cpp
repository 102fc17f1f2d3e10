#include "wassreg/frechet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

//! Gauss-Jordan inverse with partial pivoting for small q x q systems.
//! Returns false when a pivot falls below the relative threshold.
bool invert(std::vector<double> a, int q, std::vector<double>& out) {
    std::vector<double> inv(static_cast<std::size_t>(q) * q, 0.0);
    for (int i = 0; i < q; ++i) inv[static_cast<std::size_t>(i) * q + i] = 1.0;
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double tol = 1e-13 * std::max(scale, 1e-300);

    for (int col = 0; col < q; ++col) {
        int pivot = col;
        for (int r = col + 1; r < q; ++r)
            if (std::abs(a[static_cast<std::size_t>(r) * q + col]) >
                std::abs(a[static_cast<std::size_t>(pivot) * q + col]))
                pivot = r;
        if (std::abs(a[static_cast<std::size_t>(pivot) * q + col]) <= tol) return false;
        if (pivot != col) {
            for (int c = 0; c < q; ++c) {
                std::swap(a[static_cast<std::size_t>(pivot) * q + c], a[static_cast<std::size_t>(col) * q + c]);
                std::swap(inv[static_cast<std::size_t>(pivot) * q + c],
                          inv[static_cast<std::size_t>(col) * q + c]);
            }
        }
        const double d = a[static_cast<std::size_t>(col) * q + col];
        for (int c = 0; c < q; ++c) {
            a[static_cast<std::size_t>(col) * q + c] /= d;
            inv[static_cast<std::size_t>(col) * q + c] /= d;
        }
        for (int r = 0; r < q; ++r) {
            if (r == col) continue;
            const double f = a[static_cast<std::size_t>(r) * q + col];
            if (f == 0.0) continue;
            for (int c = 0; c < q; ++c) {
                a[static_cast<std::size_t>(r) * q + c] -= f * a[static_cast<std::size_t>(col) * q + c];
                inv[static_cast<std::size_t>(r) * q + c] -= f * inv[static_cast<std::size_t>(col) * q + c];
            }
        }
    }
    out = std::move(inv);
    return true;
}

//! Row indices sorted by row content; summing in this order makes every
//! derived statistic independent of the input row order, bit for bit.
std::vector<int> canonical_rows(const std::vector<double>& x, int n, int q) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        for (int c = 0; c < q; ++c) {
            const double va = x[static_cast<std::size_t>(a) * q + c];
            const double vb = x[static_cast<std::size_t>(b) * q + c];
            if (va != vb) return va < vb;
        }
        return false;
    });
    return order;
}

double simpson(double lo, double hi, int intervals, const std::function<double(double)>& f) {
    const double h = (hi - lo) / intervals;
    double s = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) s += f(lo + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

double base_kernel(KernelFamily fam, double u) {
    switch (fam) {
    case KernelFamily::gaussian:
        return std::exp(-0.5 * u * u) * 0.3989422804014327;
    case KernelFamily::epanechnikov:
        return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
}

} // namespace

PredictorSample::PredictorSample(std::vector<double> x, int n, int q, bool allow_ridge)
    : x_(std::move(x)), n_(n), q_(q) {
    require(n_ >= 1 && q_ >= 1, "predictor sample: n and q must be positive");
    require(x_.size() == static_cast<std::size_t>(n_) * q_, "predictor sample: data size must be n*q");
    require(n_ >= q_ + 1, "predictor sample: need n >= q + 1 observations");
    for (double v : x_) require(std::isfinite(v), "predictor sample: values must be finite");

    const std::vector<int> order = canonical_rows(x_, n_, q_);

    mean_.assign(q_, 0.0);
    for (int i : order)
        for (int a = 0; a < q_; ++a) mean_[a] += value(i, a);
    for (double& v : mean_) v /= n_;

    cov_.assign(static_cast<std::size_t>(q_) * q_, 0.0);
    for (int i : order)
        for (int a = 0; a < q_; ++a)
            for (int b = 0; b < q_; ++b)
                cov_[static_cast<std::size_t>(a) * q_ + b] +=
                    (value(i, a) - mean_[a]) * (value(i, b) - mean_[b]);
    for (double& v : cov_) v /= n_;

    if (!invert(cov_, q_, cov_inv_)) {
        if (!allow_ridge) throw std::invalid_argument("predictor sample: singular covariance");
        double tr = 0.0;
        for (int a = 0; a < q_; ++a) tr += cov_[static_cast<std::size_t>(a) * q_ + a];
        double eps = 1e-10 * tr / q_;
        if (eps <= 0.0) eps = 1e-10;
        std::vector<double> ridged = cov_;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (int a = 0; a < q_; ++a) ridged[static_cast<std::size_t>(a) * q_ + a] = cov_[static_cast<std::size_t>(a) * q_ + a] + eps;
            if (invert(ridged, q_, cov_inv_)) {
                ridge_applied_ = true;
                return;
            }
            eps *= 10.0;
        }
        throw std::invalid_argument("predictor sample: covariance not invertible even with ridge");
    }
}

PredictorSample PredictorSample::from_scalar(std::vector<double> x, bool allow_ridge) {
    const int n = static_cast<int>(x.size());
    return PredictorSample(std::move(x), n, 1, allow_ridge);
}

std::pair<double, double> PredictorSample::range(int axis) const {
    double lo = value(0, axis), hi = lo;
    for (int i = 1; i < n_; ++i) {
        lo = std::min(lo, value(i, axis));
        hi = std::max(hi, value(i, axis));
    }
    return {lo, hi};
}

KernelSpec::KernelSpec(KernelFamily family, std::vector<double> bandwidth)
    : family_(family), h_(std::move(bandwidth)) {
    require(!h_.empty(), "kernel: need at least one bandwidth");
    for (double h : h_) require(std::isfinite(h) && h > 0.0, "kernel: bandwidths must be positive");

    const double reach = family_ == KernelFamily::gaussian ? 12.0 : 1.0;
    k14_ = simpson(-reach, reach, 4000,
                   [&](double u) { return base_kernel(family_, u) * u * u * u * u; });
    k26_ = simpson(-reach, reach, 4000, [&](double u) {
        const double k = base_kernel(family_, u);
        const double u2 = u * u;
        return k * k * u2 * u2 * u2;
    });
    require(std::isfinite(k14_) && std::isfinite(k26_), "kernel: moment integrals must be finite");
}

KernelSpec KernelSpec::gaussian(double bandwidth) {
    return KernelSpec(KernelFamily::gaussian, {bandwidth});
}

double KernelSpec::density(std::span<const double> u) const {
    require(u.size() == h_.size(), "kernel: argument dimension must match bandwidth count");
    double k = 1.0;
    for (std::size_t a = 0; a < h_.size(); ++a) k *= base_kernel(family_, u[a] / h_[a]) / h_[a];
    return k;
}

std::vector<double> global_weights(const PredictorSample& sample, std::span<const double> x) {
    const int n = sample.n(), q = sample.q();
    require(static_cast<int>(x.size()) == q, "global_weights: query dimension must match sample");

    // t = Sigma^-1 (x - Xbar)
    std::vector<double> t(q, 0.0);
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
            t[a] += sample.covariance_inverse()[static_cast<std::size_t>(a) * q + b] *
                    (x[b] - sample.mean()[b]);

    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        double s = 1.0;
        for (int a = 0; a < q; ++a) s += (sample.value(i, a) - sample.mean()[a]) * t[a];
        w[i] = s;
    }
    return w;
}

std::vector<double> local_weights(const PredictorSample& sample, std::span<const double> x,
                                  const KernelSpec& kernel) {
    const int n = sample.n(), q = sample.q();
    require(static_cast<int>(x.size()) == q, "local_weights: query dimension must match sample");
    require(static_cast<int>(kernel.bandwidth().size()) == q,
            "local_weights: one bandwidth per predictor axis");

    const std::vector<int> order = canonical_rows(sample.data(), n, q);

    std::vector<double> kh(n), diff(q);
    double mu0 = 0.0;
    std::vector<double> mu1(q, 0.0), mu2(static_cast<std::size_t>(q) * q, 0.0);
    for (int i : order) {
        for (int a = 0; a < q; ++a) diff[a] = sample.value(i, a) - x[a];
        kh[i] = kernel.density(diff);
        mu0 += kh[i];
        for (int a = 0; a < q; ++a) {
            mu1[a] += kh[i] * diff[a];
            for (int b = 0; b < q; ++b) mu2[static_cast<std::size_t>(a) * q + b] += kh[i] * diff[a] * diff[b];
        }
    }
    mu0 /= n;
    for (double& v : mu1) v /= n;
    for (double& v : mu2) v /= n;

    std::vector<double> mu2_inv;
    if (!invert(mu2, q, mu2_inv)) {
        double tr = 0.0;
        for (int a = 0; a < q; ++a) tr += mu2[static_cast<std::size_t>(a) * q + a];
        double eps = std::max(1e-10 * tr / q, 1e-14);
        std::vector<double> ridged = mu2;
        bool ok = false;
        for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
            for (int a = 0; a < q; ++a) ridged[static_cast<std::size_t>(a) * q + a] = mu2[static_cast<std::size_t>(a) * q + a] + eps;
            ok = invert(ridged, q, mu2_inv);
            eps *= 10.0;
        }
        if (!ok) throw std::invalid_argument("local_weights: bandwidth too small at x");
    }

    // g = mu2^-1 mu1, sigma0^2 = mu0 - mu1' g
    std::vector<double> g(q, 0.0);
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) g[a] += mu2_inv[static_cast<std::size_t>(a) * q + b] * mu1[b];
    double sigma0sq = mu0;
    for (int a = 0; a < q; ++a) sigma0sq -= mu1[a] * g[a];
    if (!(sigma0sq > 1e-300) || sigma0sq <= 1e-12 * std::max(mu0, 1e-300))
        throw std::invalid_argument("local_weights: bandwidth too small at x");

    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        double corr = 1.0;
        for (int a = 0; a < q; ++a) corr -= g[a] * (sample.value(i, a) - x[a]);
        w[i] = kh[i] * corr / sigma0sq;
    }
    return w;
}

} // namespace wassreg
