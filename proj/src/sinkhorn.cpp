#include "wassreg/sinkhorn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wassreg/errors.hpp"
#include <cstdio>

namespace wassreg {

namespace {

using Eigen::ArrayXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

//! Product-grid kernel exp(-sum_ax axis_lambda[ax] * delta_ax^2) applied
//! one axis at a time.
class SeparableKernel final : public GibbsKernel {
public:
    SeparableKernel(const GridSpec& spec, std::span<const double> axis_lambda) : spec_(spec) {
        require(axis_lambda.size() == static_cast<std::size_t>(spec.dim()),
                "separable kernel: one lambda per axis");
        const int d = spec.dim();
        lambda_.assign(axis_lambda.begin(), axis_lambda.end());
        k_.resize(d);
        cost_.resize(d);
        logk_.resize(d);
        for (int a = 0; a < d; ++a) {
            require(lambda_[a] > 0.0, "separable kernel: lambda must be positive");
            const int n = spec.count(a);
            k_[a].resize(n, n);
            cost_[a].resize(n, n);
            logk_[a].resize(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double d1 = (i - j) * spec.step(a);
                    const double d2 = d1 * d1;
                    logk_[a](i, j) = -lambda_[a] * d2;
                    k_[a](i, j) = std::exp(-lambda_[a] * d2);
                    cost_[a](i, j) = d2 * k_[a](i, j);
                }
        }
    }

    std::size_t size() const override { return spec_.size(); }
    std::size_t scratch_size() const override { return 2 * spec_.size(); }

    void apply(const double* x, double* y, double* scratch) const override {
        sweep(x, y, scratch, -1);
    }

    void apply_cost(const double* x, double* y, double* scratch) const override {
        // (K o D) x with D = sum_ax D_ax: one sweep per axis with that
        // axis's cost-weighted factor, accumulated into y.
        const std::size_t m = size();
        std::vector<double> acc(m, 0.0);
        for (int a = 0; a < spec_.dim(); ++a) {
            sweep(x, y, scratch, a);
            for (std::size_t i = 0; i < m; ++i) acc[i] += y[i];
        }
        std::copy(acc.begin(), acc.end(), y);
    }

    void apply_log(const double* log_x, double* log_y, double* scratch) const override {
        const std::size_t m = size();
        const int d = spec_.dim();
        double* buf[2] = {log_y, scratch};
        // Arrange the ping-pong so the last pass writes into log_y.
        const double* src = log_x;
        int cur = (d % 2 == 1) ? 0 : 1;
        for (int a = 0; a < d; ++a) {
            lse_axis(a, src, buf[cur]);
            src = buf[cur];
            cur = 1 - cur;
        }
        if (src != log_y) std::copy(src, src + m, log_y);
    }

    //! Batched y = K x over the columns of an m-by-n matrix, with the same
    //! sweep structure as apply(). Columns are independent, so results per
    //! measure do not depend on which other columns are present.
    void apply_all(const Eigen::MatrixXd& in, Eigen::MatrixXd& out, Eigen::MatrixXd& work) const {
        const int d = spec_.dim();
        const Eigen::Index ncols = in.cols();
        out.resize(in.rows(), ncols);
        work.resize(in.rows(), ncols);
        const Eigen::MatrixXd* src = &in;
        Eigen::MatrixXd* buf[2] = {&out, &work};
        int cur = (d % 2 == 1) ? 0 : 1;
        for (int a = 0; a < d; ++a) {
            batched_axis(a, k_[a], *src, *buf[cur]);
            src = buf[cur];
            cur = 1 - cur;
        }
        if (src != &out) out = *src;
    }

    double log_kernel(std::size_t k, std::size_t l) const override {
        double e = 0.0;
        for (int a = spec_.dim() - 1; a >= 0; --a) {
            const std::size_t n = static_cast<std::size_t>(spec_.count(a));
            const double d1 = (static_cast<double>(k % n) - static_cast<double>(l % n)) * spec_.step(a);
            e += lambda_[a] * d1 * d1;
            k /= n;
            l /= n;
        }
        return -e;
    }

    double ground_cost(std::size_t k, std::size_t l) const override {
        return spec_.squared_distance(k, l);
    }

    const std::vector<double>& axis_lambda() const { return lambda_; }

private:
    //! One full pass y = K x, with axis `cost_axis` (if >= 0) using the
    //! cost-weighted factor instead of the plain kernel factor.
    void sweep(const double* x, double* y, double* scratch, int cost_axis) const {
        const std::size_t m = size();
        const int d = spec_.dim();
        double* buf[2] = {y, scratch};
        const double* src = x;
        int cur = (d % 2 == 1) ? 0 : 1;
        for (int a = 0; a < d; ++a) {
            const Eigen::MatrixXd& f = (a == cost_axis) ? cost_[a] : k_[a];
            apply_axis(a, f, src, buf[cur]);
            src = buf[cur];
            cur = 1 - cur;
        }
        if (src != y) std::copy(src, src + m, y);
    }

    void apply_axis(int axis, const Eigen::MatrixXd& factor, const double* src, double* dst) const {
        const int n = spec_.count(axis);
        std::size_t pre = 1, post = 1;
        for (int b = 0; b < axis; ++b) pre *= static_cast<std::size_t>(spec_.count(b));
        for (int b = axis + 1; b < spec_.dim(); ++b) post *= static_cast<std::size_t>(spec_.count(b));
        for (std::size_t p = 0; p < pre; ++p) {
            const std::size_t off = p * static_cast<std::size_t>(n) * post;
            Eigen::Map<const RowMat> in(src + off, n, static_cast<Eigen::Index>(post));
            Eigen::Map<RowMat> out(dst + off, n, static_cast<Eigen::Index>(post));
            out.noalias() = factor * in;
        }
    }

    //! One axis sweep over every column at once. The last axis collapses to
    //! a single large product; earlier axes run one block product per
    //! (column, leading-index) slice.
    void batched_axis(int axis, const Eigen::MatrixXd& factor, const Eigen::MatrixXd& in,
                      Eigen::MatrixXd& out) const {
        const int n = spec_.count(axis);
        std::size_t pre = 1, post = 1;
        for (int b = 0; b < axis; ++b) pre *= static_cast<std::size_t>(spec_.count(b));
        for (int b = axis + 1; b < spec_.dim(); ++b) post *= static_cast<std::size_t>(spec_.count(b));
        const Eigen::Index ncols = in.cols();
        if (post == 1) {
            // Column-major (m, ncols) data is row-major (ncols * pre, n).
            Eigen::Map<const RowMat> src(in.data(), ncols * static_cast<Eigen::Index>(pre), n);
            Eigen::Map<RowMat> dst(out.data(), ncols * static_cast<Eigen::Index>(pre), n);
            dst.noalias() = src * factor; // factor is symmetric
            return;
        }
        for (Eigen::Index c = 0; c < ncols; ++c) {
            for (std::size_t p = 0; p < pre; ++p) {
                const std::size_t off = p * static_cast<std::size_t>(n) * post;
                Eigen::Map<const RowMat> src(in.col(c).data() + off, n,
                                             static_cast<Eigen::Index>(post));
                Eigen::Map<RowMat> dst(out.col(c).data() + off, n, static_cast<Eigen::Index>(post));
                dst.noalias() = factor * src;
            }
        }
    }

    void lse_axis(int axis, const double* src, double* dst) const {
        const int n = spec_.count(axis);
        const Eigen::MatrixXd& lk = logk_[axis];
        std::size_t pre = 1, post = 1;
        for (int b = 0; b < axis; ++b) pre *= static_cast<std::size_t>(spec_.count(b));
        for (int b = axis + 1; b < spec_.dim(); ++b) post *= static_cast<std::size_t>(spec_.count(b));
        Eigen::ArrayXd shifted(n);
        for (std::size_t p = 0; p < pre; ++p) {
            const std::size_t off = p * static_cast<std::size_t>(n) * post;
            for (std::size_t q = 0; q < post; ++q) {
                Eigen::Map<const Eigen::ArrayXd, 0, Eigen::InnerStride<>> col(
                    src + off + q, n, Eigen::InnerStride<>(static_cast<Eigen::Index>(post)));
                for (int i = 0; i < n; ++i) {
                    shifted = lk.col(i).array() + col; // lk is symmetric
                    const double mx = shifted.maxCoeff();
                    dst[off + static_cast<std::size_t>(i) * post + q] =
                        (mx > kNegInf) ? mx + std::log((shifted - mx).exp().sum()) : kNegInf;
                }
            }
        }
    }

    GridSpec spec_;
    std::vector<double> lambda_;
    std::vector<Eigen::MatrixXd> k_, cost_, logk_;
};

class DenseKernel final : public GibbsKernel {
public:
    DenseKernel(const CostMatrix& cost, double lambda) : m_(cost.size()) {
        require(lambda > 0.0, "dense kernel: lambda must be positive");
        k_.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
        c_.resize(k_.rows(), k_.cols());
        logk_.resize(k_.rows(), k_.cols());
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < m_; ++j) {
                const double d = cost(i, j);
                logk_(i, j) = -lambda * d;
                k_(i, j) = std::exp(-lambda * d);
                c_(i, j) = d * k_(i, j);
            }
        ground_copy_.assign(cost.entries().begin(), cost.entries().end());
    }

    std::size_t size() const override { return m_; }
    std::size_t scratch_size() const override { return 0; }

    void apply(const double* x, double* y, double*) const override {
        Eigen::Map<const Eigen::VectorXd> in(x, static_cast<Eigen::Index>(m_));
        Eigen::Map<Eigen::VectorXd> out(y, static_cast<Eigen::Index>(m_));
        out.noalias() = k_ * in;
    }

    void apply_cost(const double* x, double* y, double*) const override {
        Eigen::Map<const Eigen::VectorXd> in(x, static_cast<Eigen::Index>(m_));
        Eigen::Map<Eigen::VectorXd> out(y, static_cast<Eigen::Index>(m_));
        out.noalias() = c_ * in;
    }

    void apply_log(const double* log_x, double* log_y, double*) const override {
        for (std::size_t i = 0; i < m_; ++i) {
            double mx = kNegInf;
            for (std::size_t k = 0; k < m_; ++k) {
                const double t = logk_(i, k) + log_x[k];
                if (t > mx) mx = t;
            }
            if (mx == kNegInf) {
                log_y[i] = kNegInf;
                continue;
            }
            double s = 0.0;
            for (std::size_t k = 0; k < m_; ++k) s += std::exp(logk_(i, k) + log_x[k] - mx);
            log_y[i] = mx + std::log(s);
        }
    }

    double log_kernel(std::size_t k, std::size_t l) const override { return logk_(k, l); }
    double ground_cost(std::size_t k, std::size_t l) const override {
        return ground_copy_[k * m_ + l];
    }

private:
    std::size_t m_;
    Eigen::MatrixXd k_, c_, logk_;
    std::vector<double> ground_copy_;
};

//! <S, D> for S = exp(lu) K exp(lv), row-shifted for stability.
double plan_cost_log(const GibbsKernel& kernel, const double* lu, const double* lv) {
    const std::size_t m = kernel.size();
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (lu[k] == kNegInf) continue;
        double mx = kNegInf;
        for (std::size_t l = 0; l < m; ++l) {
            if (lv[l] == kNegInf) continue;
            mx = std::max(mx, lu[k] + kernel.log_kernel(k, l) + lv[l]);
        }
        if (mx == kNegInf) continue;
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            if (lv[l] == kNegInf) continue;
            s += std::exp(lu[k] + kernel.log_kernel(k, l) + lv[l] - mx) * kernel.ground_cost(k, l);
        }
        total += std::exp(mx) * s;
    }
    return total;
}

struct ScalingOutcome {
    ArrayXd u, v, row_marginal;
    int iterations = 0;
    double violation = 0.0;
    bool log_mode = false;
    ArrayXd lu, lv;
};

bool all_finite(const ArrayXd& x) { return x.allFinite(); }

//! Alternating scaling in the linear domain. Returns false when scalings
//! underflow or blow up, in which case the caller retries in log domain.
bool scaling_linear(const GibbsKernel& kernel, const ArrayXd& a, const ArrayXd& b,
                    const SinkhornSettings& s, ScalingOutcome& out) {
    const std::size_t m = kernel.size();
    std::vector<double> scratch(kernel.scratch_size());
    ArrayXd u = (a > 0.0).cast<double>();
    ArrayXd v = (b > 0.0).cast<double>();
    ArrayXd kv(m), ku(m);
    double viol = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < s.max_iters; ++it) {
        kernel.apply(v.data(), kv.data(), scratch.data());
        if (it > 0) {
            viol = ((u * kv - a).abs()).maxCoeff();
            if (viol <= s.tolerance) break;
        }
        for (std::size_t k = 0; k < m; ++k) {
            if (a[k] <= 0.0) {
                u[k] = 0.0;
                continue;
            }
            if (kv[k] <= 0.0 || !std::isfinite(kv[k])) return false;
            u[k] = a[k] / kv[k];
        }
        kernel.apply(u.data(), ku.data(), scratch.data());
        for (std::size_t l = 0; l < m; ++l) {
            if (b[l] <= 0.0) {
                v[l] = 0.0;
                continue;
            }
            if (ku[l] <= 0.0 || !std::isfinite(ku[l])) return false;
            v[l] = b[l] / ku[l];
        }
        if (!all_finite(u) || !all_finite(v)) return false;
    }
    if (it >= s.max_iters)
        throw SinkhornNonConvergence("sinkhorn: marginal violation " + std::to_string(viol) +
                                         " above tolerance after max_iters",
                                     viol, it);
    out.u = std::move(u);
    out.v = std::move(v);
    out.row_marginal = out.u * kv;
    out.iterations = it;
    out.violation = viol;
    out.log_mode = false;
    return true;
}

void scaling_log(const GibbsKernel& kernel, const ArrayXd& a, const ArrayXd& b,
                 const SinkhornSettings& s, ScalingOutcome& out) {
    const std::size_t m = kernel.size();
    std::vector<double> scratch(kernel.scratch_size());
    auto safe_log = [](const ArrayXd& x) {
        ArrayXd r(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = x[i] > 0.0 ? std::log(x[i]) : kNegInf;
        return r;
    };
    const ArrayXd la = safe_log(a), lb = safe_log(b);
    ArrayXd lu(m), lv(m);
    for (std::size_t i = 0; i < m; ++i) lu[i] = a[i] > 0.0 ? 0.0 : kNegInf;
    for (std::size_t i = 0; i < m; ++i) lv[i] = b[i] > 0.0 ? 0.0 : kNegInf;
    ArrayXd lkv(m), lku(m);
    double viol = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < s.max_iters; ++it) {
        kernel.apply_log(lv.data(), lkv.data(), scratch.data());
        if (it > 0) {
            viol = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double r = (lu[k] == kNegInf) ? 0.0 : std::exp(lu[k] + lkv[k]);
                viol = std::max(viol, std::abs(r - a[k]));
            }
            if (viol <= s.tolerance) break;
        }
        for (std::size_t k = 0; k < m; ++k) lu[k] = (la[k] == kNegInf) ? kNegInf : la[k] - lkv[k];
        kernel.apply_log(lu.data(), lku.data(), scratch.data());
        for (std::size_t l = 0; l < m; ++l) lv[l] = (lb[l] == kNegInf) ? kNegInf : lb[l] - lku[l];
    }
    if (it >= s.max_iters)
        throw SinkhornNonConvergence("sinkhorn (log domain): marginal violation " +
                                         std::to_string(viol) + " above tolerance after max_iters",
                                     viol, it);
    out.lu = std::move(lu);
    out.lv = std::move(lv);
    ArrayXd row(m);
    for (std::size_t k = 0; k < m; ++k)
        row[k] = (out.lu[k] == kNegInf) ? 0.0 : std::exp(out.lu[k] + lkv[k]);
    out.row_marginal = std::move(row);
    out.iterations = it;
    out.violation = viol;
    out.log_mode = true;
}

ScalingOutcome run_scaling(const GibbsKernel& kernel, const ArrayXd& a, const ArrayXd& b,
                           const SinkhornSettings& s) {
    ScalingOutcome out;
    if (!s.log_domain) {
        if (scaling_linear(kernel, a, b, s, out)) return out;
        if (!s.allow_log_fallback)
            throw std::runtime_error(
                "sinkhorn: scaling underflow in linear mode and log fallback disabled; "
                "reduce lambda or enable log_domain");
    }
    scaling_log(kernel, a, b, s, out);
    return out;
}

ArrayXd to_array(const std::vector<double>& x) {
    return Eigen::Map<const ArrayXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

std::vector<double> to_vector(const ArrayXd& x) {
    return std::vector<double>(x.data(), x.data() + x.size());
}

} // namespace

void SinkhornSettings::validate() const {
    require(lambda > 0.0, "sinkhorn settings: lambda must be positive");
    require(tolerance > 0.0, "sinkhorn settings: tolerance must be positive");
    require(max_iters > 0, "sinkhorn settings: max_iters must be positive");
}

std::unique_ptr<GibbsKernel> make_separable_kernel(const GridSpec& spec,
                                                   std::span<const double> axis_lambda) {
    return std::make_unique<SeparableKernel>(spec, axis_lambda);
}

std::unique_ptr<GibbsKernel> make_dense_kernel(const CostMatrix& cost, double lambda) {
    return std::make_unique<DenseKernel>(cost, lambda);
}

namespace {

SinkhornResult finish_plan(const GibbsKernel& kernel, const GridSpec& spec,
                           const DiscreteMeasure& source, const DiscreteMeasure& target,
                           const std::vector<double>& axis_lambda_for_plan, bool separable,
                           ScalingOutcome&& sc) {
    const std::size_t m = kernel.size();
    double divergence;
    if (!sc.log_mode) {
        std::vector<double> scratch(kernel.scratch_size());
        ArrayXd cv(m);
        kernel.apply_cost(sc.v.data(), cv.data(), scratch.data());
        divergence = (sc.u * cv).sum();
    } else {
        divergence = plan_cost_log(kernel, sc.lu.data(), sc.lv.data());
    }

    TransportPlan plan = [&]() {
        if (!sc.log_mode && separable) {
            return TransportPlan::from_scaling(spec, to_vector(sc.u), to_vector(sc.v),
                                               axis_lambda_for_plan, source.mass(), target.mass(),
                                               to_vector(sc.row_marginal), target.mass());
        }
        if (m > 2048)
            throw std::runtime_error("sinkhorn: plan too large to materialize; "
                                     "use sinkhorn_divergence instead");
        std::vector<double> entries(m * m, 0.0);
        if (!sc.log_mode) {
            for (std::size_t k = 0; k < m; ++k) {
                if (sc.u[k] == 0.0) continue;
                for (std::size_t l = 0; l < m; ++l) {
                    if (sc.v[l] == 0.0) continue;
                    entries[k * m + l] = sc.u[k] * std::exp(kernel.log_kernel(k, l)) * sc.v[l];
                }
            }
        } else {
            for (std::size_t k = 0; k < m; ++k) {
                if (sc.lu[k] == kNegInf) continue;
                for (std::size_t l = 0; l < m; ++l) {
                    if (sc.lv[l] == kNegInf) continue;
                    entries[k * m + l] = std::exp(sc.lu[k] + kernel.log_kernel(k, l) + sc.lv[l]);
                }
            }
        }
        return TransportPlan::from_dense(spec, std::move(entries), source.mass(), target.mass());
    }();

    return SinkhornResult{std::move(plan), divergence, sc.iterations, sc.violation};
}

} // namespace

SinkhornResult sinkhorn_plan(const DiscreteMeasure& source, const DiscreteMeasure& target,
                             const SinkhornSettings& settings) {
    settings.validate();
    require(source.spec() == target.spec(), "sinkhorn: measures must share a grid");
    const GridSpec& spec = source.spec();
    std::vector<double> axis_lambda(spec.dim(), settings.lambda);
    SeparableKernel kernel(spec, axis_lambda);
    ScalingOutcome sc = run_scaling(kernel, to_array(source.mass()), to_array(target.mass()), settings);
    return finish_plan(kernel, spec, source, target, axis_lambda, true, std::move(sc));
}

SinkhornResult sinkhorn_plan(const DiscreteMeasure& source, const DiscreteMeasure& target,
                             const CostMatrix& cost, const SinkhornSettings& settings) {
    settings.validate();
    require(source.spec() == target.spec(), "sinkhorn: measures must share a grid");
    require(cost.size() == source.spec().size(), "sinkhorn: cost matrix size must match grid");
    DenseKernel kernel(cost, settings.lambda);
    ScalingOutcome sc = run_scaling(kernel, to_array(source.mass()), to_array(target.mass()), settings);
    return finish_plan(kernel, source.spec(), source, target, {}, false, std::move(sc));
}

double sinkhorn_divergence(const DiscreteMeasure& source, const DiscreteMeasure& target,
                           const SinkhornSettings& settings) {
    settings.validate();
    require(source.spec() == target.spec(), "sinkhorn: measures must share a grid");
    const GridSpec& spec = source.spec();
    std::vector<double> axis_lambda(spec.dim(), settings.lambda);
    SeparableKernel kernel(spec, axis_lambda);
    ScalingOutcome sc = run_scaling(kernel, to_array(source.mass()), to_array(target.mass()), settings);
    if (!sc.log_mode) {
        std::vector<double> scratch(kernel.scratch_size());
        ArrayXd cv(kernel.size());
        kernel.apply_cost(sc.v.data(), cv.data(), scratch.data());
        return (sc.u * cv).sum();
    }
    return plan_cost_log(kernel, sc.lu.data(), sc.lv.data());
}

// ---------------------------------------------------------------------------
// Weighted barycenter

struct SinkhornBarycenterSolver::Impl {
    GridSpec spec;
    SinkhornSettings settings;
    std::vector<DiscreteMeasure> measures; // sorted by content
    std::vector<std::size_t> input_order;  // canonical slot -> caller index
    std::unique_ptr<SeparableKernel> kernel;
    Eigen::MatrixXd v;        // one column of scalings per measure (linear mode)
    Eigen::MatrixXd lv;       // log-domain counterpart
    Eigen::MatrixXd r_matrix; // response masses, column per measure
    ArrayXd p_state;          // last barycenter iterate; zeros mark dead points
    bool log_mode = false;
    bool warm = false;

    Impl(std::vector<DiscreteMeasure> ms, SinkhornSettings s)
        : spec(ms.at(0).spec()), settings(s), measures(std::move(ms)) {
        settings.validate();
        for (const DiscreteMeasure& m : measures)
            require(m.spec() == spec, "barycenter: measures must share a grid");

        // Measures are held sorted by content so the internal memory layout,
        // and with it every floating-point result, is independent of the
        // order the caller presented them in.
        input_order.resize(measures.size());
        std::iota(input_order.begin(), input_order.end(), 0);
        std::stable_sort(input_order.begin(), input_order.end(), [&](std::size_t a, std::size_t b) {
            return measures[a].mass() < measures[b].mass();
        });
        std::vector<DiscreteMeasure> sorted;
        sorted.reserve(measures.size());
        for (std::size_t i : input_order) sorted.push_back(std::move(measures[i]));
        measures = std::move(sorted);

        // Blur measured in grid steps: lambda is applied to distances in
        // units of the cell edge, so refining the grid sharpens the result.
        std::vector<double> axis_lambda(spec.dim());
        for (int a = 0; a < spec.dim(); ++a)
            axis_lambda[a] = settings.lambda / (spec.step(a) * spec.step(a));
        kernel = std::make_unique<SeparableKernel>(spec, axis_lambda);
        reset();
    }

    void reset() {
        const Eigen::Index m = static_cast<Eigen::Index>(spec.size());
        const Eigen::Index n = static_cast<Eigen::Index>(measures.size());
        v = Eigen::MatrixXd::Ones(m, n);
        lv = Eigen::MatrixXd::Zero(m, n);
        p_state = ArrayXd::Constant(m, 1.0 / static_cast<double>(m));
        log_mode = settings.log_domain;
        warm = false;
    }

    //! Consolidation order: content order with ties broken by weight, so
    //! equal measures contribute in a weight-deterministic sequence.
    std::vector<std::size_t> consolidation_order(const std::vector<double>& weights) const {
        std::vector<std::size_t> order(measures.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (measures[a].mass() != measures[b].mass()) return a < b; // already content-sorted
            return weights[a] < weights[b];
        });
        return order;
    }

    DiscreteMeasure solve(std::span<const double> weights, int* iterations_out) {
        const std::size_t n = measures.size();
        require(weights.size() == n, "barycenter: one weight per measure");
        double wsum = 0.0, wmax = kNegInf;
        for (double w : weights) {
            wsum += w;
            wmax = std::max(wmax, w);
        }
        require(std::abs(wsum / static_cast<double>(n) - 1.0) <= 1e-8,
                "barycenter: weights must average to 1");
        require(wmax > 0.0, "barycenter: at least one weight must be positive");

        // Weights rearranged into the canonical slots.
        std::vector<double> canonical_w(n);
        for (std::size_t slot = 0; slot < n; ++slot) canonical_w[slot] = weights[input_order[slot]];

        const std::vector<std::size_t> order = consolidation_order(canonical_w);
        std::vector<double> omega(n);
        for (std::size_t i = 0; i < n; ++i) omega[i] = canonical_w[i] / static_cast<double>(n);

        // The iteration preserves the omega-weighted log-mean of the
        // scalings, and the weighted barycenter is the feasible point whose
        // mean is zero. A cold start has it; a state warmed under other
        // weights must be rebalanced or it would satisfy the marginal
        // conditions for the old solution and freeze there.
        if (warm) rebalance(order, omega);

        if (!log_mode) {
            ArrayXd p;
            if (solve_linear(omega, order, p, iterations_out))
                return DiscreteMeasure::normalized(spec, to_vector(p));
            if (!settings.allow_log_fallback)
                throw std::runtime_error(
                    "barycenter: scaling underflow in linear mode and log fallback disabled; "
                    "reduce lambda or enable log_domain");
            // Carry the scalings into the log domain; a poisoned state
            // (overflowed entries) cold-starts instead.
            if (v.allFinite()) {
                for (Eigen::Index c = 0; c < v.cols(); ++c)
                    for (Eigen::Index r = 0; r < v.rows(); ++r)
                        lv(r, c) = v(r, c) > 0.0 ? std::log(v(r, c)) : kNegInf;
            } else {
                lv.setZero();
            }
            log_mode = true;
        }
        ArrayXd p = solve_log(omega, order, iterations_out);
        return DiscreteMeasure::normalized(spec, to_vector(p));
    }

    //! Divides the omega-weighted pointwise geometric mean out of the
    //! scaling columns. Rows that cannot be balanced are dead.
    void rebalance(const std::vector<std::size_t>& order, const std::vector<double>& omega) {
        const std::size_t n = measures.size();
        const std::size_t m = spec.size();
        for (std::size_t k = 0; k < m; ++k) {
            if (p_state[k] <= 0.0) {
                if (!log_mode) v.row(k).setZero();
                else lv.row(k).setConstant(kNegInf);
                continue;
            }
            double logb = 0.0;
            bool alive = true;
            for (std::size_t rank = 0; rank < n && alive; ++rank) {
                const std::size_t i = order[rank];
                const double lvki = log_mode ? lv(k, i) : (v(k, i) > 0.0 ? std::log(v(k, i)) : kNegInf);
                if (!std::isfinite(lvki)) alive = false;
                else logb += omega[i] * lvki;
            }
            if (!alive || !std::isfinite(logb)) {
                p_state[k] = 0.0;
                if (!log_mode) v.row(k).setZero();
                else lv.row(k).setConstant(kNegInf);
                continue;
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (log_mode) lv(k, i) -= logb;
                else v(k, i) = std::exp(std::log(v(k, i)) - logb);
            }
        }
        const double total = p_state.sum();
        if (total > 0.0 && total != 1.0) p_state /= total;
    }

    //! Grid points whose barycenter mass has underflowed to exact zero are
    //! treated as dead: they contribute -inf to the consolidation directly
    //! instead of 0^omega, which would be ill-defined for negative weights.
    //!
    //! Convergence is declared when the response-marginal constraints hold:
    //! max_i || u_i (K v_i) - r_i ||_1 <= tolerance. An iterate-change rule
    //! alone cannot be trusted here: warm starts inherit a feasible state
    //! and would otherwise stand still.
    bool solve_linear(const std::vector<double>& omega, const std::vector<std::size_t>& order,
                      ArrayXd& result, int* iterations_out) {
        const std::size_t n = measures.size();
        const std::size_t m = spec.size();
        if (r_matrix.size() == 0) {
            r_matrix.resize(m, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < m; ++k) r_matrix(k, i) = measures[i].mass()[k];
        }
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, n);
        Eigen::MatrixXd kv(m, n), ku(m, n), work(m, n), logm(m, n);
        ArrayXd logp(m);
        std::vector<double> dropped_mass(n, 0.0);
        int rising = 0;
        int it = 0;
        double best_viol = std::numeric_limits<double>::infinity();
        double prev_viol = std::numeric_limits<double>::infinity();
        int last_improvement = 0;
        for (; it < settings.max_iters; ++it) {
            kernel->apply_all(v, kv, work);
            if (it > 0) {
                const double violation =
                    (u.array() * kv.array() - r_matrix.array()).abs().colwise().sum().maxCoeff();
                if (violation <= settings.tolerance) break;
                if (violation < 0.99 * best_viol) {
                    best_viol = violation;
                    last_improvement = it;
                } else if (it - last_improvement >= 200) {
                    break; // numerical floor above tolerance; current state stands
                }
                // Sustained growth well above the best seen: hand over to
                // the log domain, which tolerates far deeper scalings.
                if (violation > prev_viol * 1.05 && violation > 10.0 * best_viol) {
                    if (++rising >= 10) return false;
                } else {
                    rising = 0;
                }
                prev_viol = violation;
            }
            u = (r_matrix.array() / kv.array()).matrix();
            u = (r_matrix.array() == 0.0).select(0.0, u);
            if (!u.allFinite()) {
                // Response mass nobody can reach within double range gets
                // dropped as long as the total stays well below the stop
                // tolerance; more than that makes this a log-domain problem.
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < m; ++k) {
                        if (std::isfinite(u(k, i))) continue;
                        dropped_mass[i] += r_matrix(k, i);
                        if (dropped_mass[i] > 0.1 * settings.tolerance) return false;
                        u(k, i) = 0.0;
                    }
            }
            kernel->apply_all(u, ku, work);

            logm = (v.array() * ku.array()).log().matrix();
            for (std::size_t k = 0; k < m; ++k) {
                if (p_state[k] <= 0.0) {
                    logp[k] = kNegInf;
                    continue;
                }
                double acc = 0.0;
                for (std::size_t rank = 0; rank < n; ++rank) {
                    const std::size_t i = order[rank];
                    acc += omega[i] * logm(k, i);
                }
                if (!(acc < std::numeric_limits<double>::infinity()) && !(acc == kNegInf))
                    return false; // NaN or +inf on a live point
                logp[k] = acc;
            }
            const double shift = logp.maxCoeff();
            if (!std::isfinite(shift)) return false;
            ArrayXd p_new = (logp - shift).exp();
            p_new /= p_new.sum();

            p_state = std::move(p_new);
            v = ku.array().inverse().matrix();
            for (Eigen::Index c = 0; c < v.cols(); ++c) v.col(c).array() *= p_state;

            // A live point whose scalings overflow or underflow for some
            // measure cannot hold barycenter mass within double range; its
            // limit mass is an exact zero in doubles either way, so kill it
            // and carry on.
            bool repaired = false;
            for (std::size_t k = 0; k < m; ++k) {
                if (p_state[k] <= 0.0) continue;
                bool ok = true;
                for (std::size_t i = 0; i < n && ok; ++i) {
                    const double q = v(k, i);
                    ok = q > 0.0 && std::isfinite(q);
                }
                if (ok) continue;
                p_state[k] = 0.0;
                v.row(k).setZero();
                repaired = true;
            }
            if (repaired) {
                const double total = p_state.sum();
                if (!(total > 0.0)) return false;
                p_state /= total;
                // The support just changed; do not read the jump as a trend.
                rising = 0;
                best_viol = std::numeric_limits<double>::infinity();
                prev_viol = std::numeric_limits<double>::infinity();
                last_improvement = it;
            }
        }
        warm = true;
        if (iterations_out) *iterations_out = it;
        result = p_state;
        return true;
    }

    ArrayXd solve_log(const std::vector<double>& omega, const std::vector<std::size_t>& order,
                      int* iterations_out) {
        const std::size_t n = measures.size();
        const std::size_t m = spec.size();
        std::vector<double> scratch(kernel->scratch_size());
        Eigen::MatrixXd lu = Eigen::MatrixXd::Zero(m, n);
        Eigen::MatrixXd lkv(m, n), lku(m, n);
        ArrayXd logp(m);
        std::vector<ArrayXd> log_r(n);
        for (std::size_t i = 0; i < n; ++i) {
            log_r[i].resize(m);
            for (std::size_t k = 0; k < m; ++k)
                log_r[i][k] = measures[i].mass()[k] > 0.0 ? std::log(measures[i].mass()[k]) : kNegInf;
        }
        int rising = 0;
        int it = 0;
        double best_viol = std::numeric_limits<double>::infinity();
        double prev_viol = std::numeric_limits<double>::infinity();
        int last_improvement = 0;
        for (; it < settings.max_iters; ++it) {
            for (std::size_t i = 0; i < n; ++i)
                kernel->apply_log(lv.col(i).data(), lkv.col(i).data(), scratch.data());
            if (it > 0) {
                // Same marginal test as the linear loop, in exponent form.
                double violation = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < m; ++k) {
                        const double e = lu(k, i) + lkv(k, i);
                        const double row = (e == kNegInf) ? 0.0 : std::exp(e);
                        s += std::abs(row - measures[i].mass()[k]);
                    }
                    violation = std::max(violation, s);
                }
                if (violation <= settings.tolerance) break;
                if (violation < 0.99 * best_viol) {
                    best_viol = violation;
                    last_improvement = it;
                } else if (it - last_improvement >= 200) {
                    break; // numerical floor above tolerance
                }
                if (violation > prev_viol * 1.05 && violation > 10.0 * best_viol) {
                    if (++rising >= 10)
                        throw SinkhornDiverged(
                            "barycenter: iterates diverging; use a smaller lambda");
                } else {
                    rising = 0;
                }
                prev_viol = violation;
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < m; ++k)
                    lu(k, i) = (log_r[i][k] == kNegInf) ? kNegInf : log_r[i][k] - lkv(k, i);
                kernel->apply_log(lu.col(i).data(), lku.col(i).data(), scratch.data());
            }
            for (std::size_t k = 0; k < m; ++k) {
                if (p_state[k] <= 0.0) {
                    logp[k] = kNegInf;
                    continue;
                }
                double acc = 0.0;
                for (std::size_t rank = 0; rank < n; ++rank) {
                    const std::size_t i = order[rank];
                    acc += omega[i] * (lv(k, i) + lku(k, i));
                }
                if (!(acc < std::numeric_limits<double>::infinity()) && !(acc == kNegInf))
                    throw SinkhornDiverged("barycenter: iterates diverging; use a smaller lambda");
                logp[k] = acc;
            }
            const double shift = logp.maxCoeff();
            if (!std::isfinite(shift))
                throw SinkhornDiverged("barycenter: iterates diverging; use a smaller lambda");
            ArrayXd p_new = (logp - shift).exp();
            p_new /= p_new.sum();
            p_state = std::move(p_new);
            ArrayXd lp(m);
            for (std::size_t k = 0; k < m; ++k)
                lp[k] = p_state[k] > 0.0 ? std::log(p_state[k]) : kNegInf;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < m; ++k)
                    lv(k, i) = (lp[k] == kNegInf) ? kNegInf : lp[k] - lku(k, i);
        }
        warm = true;
        if (iterations_out) *iterations_out = it;
        return p_state;
    }
};

SinkhornBarycenterSolver::SinkhornBarycenterSolver(std::vector<DiscreteMeasure> measures,
                                                   SinkhornSettings settings) {
    require(!measures.empty(), "barycenter: need at least one measure");
    impl_ = std::make_unique<Impl>(std::move(measures), settings);
}

SinkhornBarycenterSolver::~SinkhornBarycenterSolver() = default;

DiscreteMeasure SinkhornBarycenterSolver::solve(std::span<const double> weights) {
    return impl_->solve(weights, &last_iterations_);
}

void SinkhornBarycenterSolver::reset() { impl_->reset(); }

DiscreteMeasure weighted_sinkhorn_barycenter(std::span<const DiscreteMeasure> measures,
                                             std::span<const double> weights,
                                             const SinkhornSettings& settings) {
    SinkhornBarycenterSolver solver(std::vector<DiscreteMeasure>(measures.begin(), measures.end()),
                                    settings);
    return solver.solve(weights);
}

} // namespace wassreg
