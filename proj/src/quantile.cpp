#include "wassreg/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr double kMonotoneSlack = 1e-12;

} // namespace

QuantileCurve::QuantileCurve(std::vector<double> values, double support_lo, double support_hi)
    : values_(std::move(values)), lo_(support_lo), hi_(support_hi) {
    require(values_.size() >= 3, "quantile curve: need at least 3 points");
    require(lo_ < hi_, "quantile curve: support interval is empty");
    const double slack = kMonotoneSlack * std::max(1.0, hi_ - lo_);
    for (std::size_t j = 0; j < values_.size(); ++j) {
        require(std::isfinite(values_[j]), "quantile curve: values must be finite");
        require(values_[j] >= lo_ - slack && values_[j] <= hi_ + slack,
                "quantile curve: values must lie in the support interval");
        values_[j] = std::clamp(values_[j], lo_, hi_);
        if (j > 0) {
            require(values_[j] >= values_[j - 1] - slack, "quantile curve: values must be nondecreasing");
            values_[j] = std::max(values_[j], values_[j - 1]);
        }
    }
}

double QuantileCurve::mean() const {
    const std::size_t p = values_.size();
    double s = 0.5 * (values_.front() + values_.back());
    for (std::size_t j = 1; j + 1 < p; ++j) s += values_[j];
    return s / static_cast<double>(p - 1);
}

QuantileCurve quantile_from_density(const DensityGrid& density, int quantile_points) {
    require(density.spec().dim() == 1, "quantile_from_density: density must be one-dimensional");
    require(quantile_points >= 3, "quantile_from_density: need at least 3 quantile points");
    const GridSpec& spec = density.spec();
    const std::vector<double>& f = density.values();
    const std::size_t n = f.size();
    const double h = spec.step(0);

    std::vector<double> cdf(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) cdf[k] = cdf[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    const double total = cdf[n - 1];
    require(total > 0.0, "degenerate density");
    for (double& c : cdf) c /= total;
    cdf[n - 1] = 1.0;

    // Effective support: last node where the CDF is still 0, first where it
    // reaches 1.
    std::size_t first = 0;
    while (first + 1 < n && cdf[first + 1] <= 0.0) ++first;
    std::size_t last = n - 1;
    while (last > 0 && cdf[last - 1] >= 1.0) --last;

    const int p = quantile_points;
    std::vector<double> q(p);
    q[0] = spec.coordinate(0, static_cast<int>(first));
    q[p - 1] = spec.coordinate(0, static_cast<int>(last));
    std::size_t k = first;
    for (int j = 1; j + 1 < p; ++j) {
        const double t = static_cast<double>(j) / (p - 1);
        while (k + 1 < n && cdf[k + 1] < t) ++k;
        const double lo = cdf[k], hi = cdf[k + 1];
        double x = spec.coordinate(0, static_cast<int>(k));
        if (hi > lo) x += h * (t - lo) / (hi - lo);
        q[j] = x;
    }
    return QuantileCurve(std::move(q), spec.lower(0), spec.upper(0));
}

QuantileCurve quantile_from_measure(const DiscreteMeasure& measure, int quantile_points) {
    require(measure.spec().dim() == 1, "quantile_from_measure: measure must be one-dimensional");
    require(quantile_points >= 3, "quantile_from_measure: need at least 3 quantile points");
    const GridSpec& spec = measure.spec();
    const std::vector<double>& m = measure.mass();
    const std::size_t n = m.size();

    std::vector<double> cdf(n);
    double run = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        run += m[k];
        cdf[k] = run;
    }
    cdf[n - 1] = 1.0;

    std::size_t first = 0;
    while (first + 1 < n && m[first] <= 0.0) ++first;
    std::size_t last = n - 1;
    while (last > 0 && m[last] <= 0.0) --last;

    const int p = quantile_points;
    std::vector<double> q(p);
    q[0] = spec.coordinate(0, static_cast<int>(first));
    q[p - 1] = spec.coordinate(0, static_cast<int>(last));
    std::size_t k = first;
    for (int j = 1; j + 1 < p; ++j) {
        const double t = static_cast<double>(j) / (p - 1);
        while (k + 1 < n && cdf[k] < t) ++k;
        q[j] = spec.coordinate(0, static_cast<int>(k));
    }
    return QuantileCurve(std::move(q), spec.lower(0), spec.upper(0));
}

DiscreteMeasure measure_from_quantile(const QuantileCurve& curve, const GridSpec& spec) {
    require(spec.dim() == 1, "measure_from_quantile: grid must be one-dimensional");
    const std::size_t n = spec.size();
    const double h = spec.step(0);
    const std::size_t atoms = std::max<std::size_t>(20000, 8 * n);
    std::vector<double> mass(n, 0.0);

    const std::size_t p = curve.points();
    for (std::size_t a = 0; a < atoms; ++a) {
        const double t = (static_cast<double>(a) + 0.5) / static_cast<double>(atoms);
        // Linear interpolation of the curve at t.
        const double pos = t * static_cast<double>(p - 1);
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(pos), p - 2);
        const double frac = pos - static_cast<double>(j);
        const double x = (1.0 - frac) * curve.value(j) + frac * curve.value(j + 1);

        double cell = (x - spec.lower(0)) / h;
        cell = std::clamp(cell, 0.0, static_cast<double>(n - 1));
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cell), n - 2);
        const double w = cell - static_cast<double>(k);
        mass[k] += 1.0 - w;
        mass[k + 1] += w;
    }
    return DiscreteMeasure::normalized(spec, std::move(mass));
}

double w2_1d(const QuantileCurve& a, const QuantileCurve& b) {
    require(a.points() == b.points(), "w2_1d: quantile resolutions differ");
    const std::size_t p = a.points();
    auto sq = [](double d) { return d * d; };
    double s = 0.5 * (sq(a.value(0) - b.value(0)) + sq(a.value(p - 1) - b.value(p - 1)));
    for (std::size_t j = 1; j + 1 < p; ++j) s += sq(a.value(j) - b.value(j));
    return s / static_cast<double>(p - 1);
}

double w2_1d_discrete(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    require(a.spec().dim() == 1 && b.spec().dim() == 1, "w2_1d_discrete: measures must be one-dimensional");
    struct Atom {
        double x, m;
    };
    auto atoms = [](const DiscreteMeasure& d) {
        std::vector<Atom> out;
        for (std::size_t k = 0; k < d.mass().size(); ++k)
            if (d.mass()[k] > 0.0) out.push_back({d.spec().coordinate(0, static_cast<int>(k)), d.mass()[k]});
        return out;
    };
    std::vector<Atom> pa = atoms(a), pb = atoms(b);
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    double ra = pa[0].m, rb = pb[0].m;
    while (true) {
        const double moved = std::min(ra, rb);
        const double d = pa[i].x - pb[j].x;
        cost += moved * d * d;
        ra -= moved;
        rb -= moved;
        if (ra <= 1e-17) {
            if (++i == pa.size()) break;
            ra = pa[i].m;
        }
        if (rb <= 1e-17) {
            if (++j == pb.size()) break;
            rb = pb[j].m;
        }
    }
    return cost;
}

std::vector<double> isotonic_projection(std::vector<double> values) {
    const std::size_t n = values.size();
    if (n <= 1) return values;
    // Pool-adjacent-violators with uniform weights.
    std::vector<double> mean(n), sum(n);
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum[blocks] = values[i];
        count[blocks] = 1;
        mean[blocks] = values[i];
        ++blocks;
        while (blocks >= 2 && mean[blocks - 2] > mean[blocks - 1]) {
            sum[blocks - 2] += sum[blocks - 1];
            count[blocks - 2] += count[blocks - 1];
            mean[blocks - 2] = sum[blocks - 2] / static_cast<double>(count[blocks - 2]);
            --blocks;
        }
    }
    std::vector<double> out(n);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t c = 0; c < count[b]; ++c) out[pos++] = mean[b];
    return out;
}

QuantileCurve weighted_quantile_barycenter(std::span<const QuantileCurve> curves,
                                           std::span<const double> weights) {
    require(!curves.empty(), "weighted_quantile_barycenter: empty input");
    require(curves.size() == weights.size(), "weighted_quantile_barycenter: one weight per curve");
    const std::size_t n = curves.size();
    const std::size_t p = curves[0].points();
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(curves[i].points() == p, "weighted_quantile_barycenter: quantile resolutions differ");
        wsum += weights[i];
    }
    require(std::abs(wsum / static_cast<double>(n) - 1.0) <= 1e-8,
            "weighted_quantile_barycenter: weights must average to 1");

    // Content-canonical accumulation order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (curves[a].values() != curves[b].values()) return curves[a].values() < curves[b].values();
        return weights[a] < weights[b];
    });

    double lo = curves[0].support_lo(), hi = curves[0].support_hi();
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, curves[i].support_lo());
        hi = std::max(hi, curves[i].support_hi());
    }

    std::vector<double> avg(p, 0.0);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        const double w = weights[i] / static_cast<double>(n);
        for (std::size_t j = 0; j < p; ++j) avg[j] += w * curves[i].value(j);
    }

    std::vector<double> proj = isotonic_projection(std::move(avg));
    for (double& v : proj) v = std::clamp(v, lo, hi);
    return QuantileCurve(std::move(proj), lo, hi);
}

} // namespace wassreg
