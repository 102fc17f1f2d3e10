#include "wassreg/regression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "wassreg/errors.hpp"
#include "wassreg/transport_lp.hpp"

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

FittedModel FittedModel::exact1d(PredictorSample predictors, std::vector<QuantileCurve> responses,
                                 FitMode mode, std::optional<KernelSpec> kernel) {
    require(!responses.empty(), "model: need at least one response");
    require(static_cast<int>(responses.size()) == predictors.n(),
            "model: response count must equal predictor count");
    const std::size_t p = responses[0].points();
    for (const QuantileCurve& c : responses)
        require(c.points() == p, "model: responses must share one quantile resolution");
    if (mode == FitMode::local)
        require(kernel.has_value(), "model: local mode needs a kernel");

    FittedModel m;
    m.predictors_ = std::move(predictors);
    m.quantile_responses_ = std::move(responses);
    m.mode_ = mode;
    m.solver_ = SolverKind::exact1d;
    m.kernel_ = std::move(kernel);
    return m;
}

FittedModel FittedModel::sinkhorn(PredictorSample predictors, std::vector<DiscreteMeasure> responses,
                                  FitMode mode, SinkhornSettings settings,
                                  std::optional<KernelSpec> kernel) {
    require(!responses.empty(), "model: need at least one response");
    require(static_cast<int>(responses.size()) == predictors.n(),
            "model: response count must equal predictor count");
    for (const DiscreteMeasure& r : responses)
        require(r.spec() == responses[0].spec(), "model: responses must share one grid");
    if (mode == FitMode::local)
        require(kernel.has_value(), "model: local mode needs a kernel");
    settings.validate();

    FittedModel m;
    m.predictors_ = std::move(predictors);
    m.measure_responses_ = std::move(responses);
    m.mode_ = mode;
    m.solver_ = SolverKind::sinkhorn;
    m.kernel_ = std::move(kernel);
    m.settings_ = settings;
    return m;
}

std::vector<double> FittedModel::weights_at(std::span<const double> x) const {
    if (mode_ == FitMode::global) return global_weights(predictors_, x);

    // Local fitting reaches one bandwidth beyond the design range and no
    // further; it is not suited for extrapolation.
    for (int a = 0; a < predictors_.q(); ++a) {
        const auto [lo, hi] = predictors_.range(a);
        const double reach = kernel_->bandwidth()[a];
        if (x[a] < lo - reach || x[a] > hi + reach)
            throw ExtrapolationNotSupported(
                "local mode cannot extrapolate: x outside bandwidth reach of the design range [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "] on axis " + std::to_string(a));
    }
    return local_weights(predictors_, x, *kernel_);
}

Prediction FittedModel::predict(std::span<const double> x) const {
    const std::vector<double> w = weights_at(x);
    if (solver_ == SolverKind::exact1d)
        return weighted_quantile_barycenter(quantile_responses_, w);
    return weighted_sinkhorn_barycenter(measure_responses_, w, settings_);
}

Prediction FittedModel::predict(double x) const {
    const double xs[1] = {x};
    return predict(std::span<const double>(xs, 1));
}

std::vector<Prediction> predict_path(const FittedModel& model,
                                     std::span<const std::vector<double>> xs) {
    std::vector<Prediction> out;
    out.reserve(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
        try {
            out.push_back(model.predict(xs[k]));
        } catch (const std::exception& e) {
            throw std::runtime_error("predict_path: element " + std::to_string(k) +
                                     " failed: " + e.what());
        }
    }
    return out;
}

DiscreteMeasure mccann_interpolate(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t,
                                   const SinkhornSettings& settings) {
    require(nu0.spec() == nu1.spec(), "mccann: measures must share a grid");
    const GridSpec& spec = nu0.spec();
    const int d = spec.dim();
    const std::size_t m = spec.size();

    const bool lp = nu0.support_size() <= kExactTransportSupportCap &&
                    nu1.support_size() <= kExactTransportSupportCap;

    TransportPlan plan = [&]() {
        if (lp) return exact_transport(nu0, nu1).plan;
        // Sharp entropic plan: blur measured in grid steps, matching the
        // barycenter solver, so the interpolant does not smear.
        SinkhornSettings scaled = settings;
        scaled.validate();
        scaled.lambda = settings.lambda / (spec.step(0) * spec.step(0));
        for (int a = 1; a < d; ++a)
            require(std::abs(spec.step(a) - spec.step(0)) <= 1e-12 * spec.step(0),
                    "mccann: sinkhorn fallback needs equal steps per axis");
        return sinkhorn_plan(nu0, nu1, scaled).plan;
    }();

    std::vector<double> mass(m, 0.0);
    std::vector<int> idx0(d), idx1(d);
    std::vector<double> y(d), cell(d);
    std::vector<int> base(d);
    double escaped = 0.0;

    plan.for_each_atom([&](std::size_t k, std::size_t l, double w) {
        spec.axis_indices(k, idx0.data());
        spec.axis_indices(l, idx1.data());
        bool outside = false;
        for (int a = 0; a < d; ++a) {
            y[a] = (1.0 - t) * spec.coordinate(a, idx0[a]) + t * spec.coordinate(a, idx1[a]);
            const double slack = 1e-9 * (spec.upper(a) - spec.lower(a));
            if (y[a] < spec.lower(a) - slack || y[a] > spec.upper(a) + slack) outside = true;
        }
        if (outside) {
            escaped += w;
            return;
        }
        // Multilinear binning onto the 2^d surrounding nodes.
        for (int a = 0; a < d; ++a) {
            double pos = (y[a] - spec.lower(a)) / spec.step(a);
            pos = std::clamp(pos, 0.0, static_cast<double>(spec.count(a) - 1));
            int b = std::min(static_cast<int>(pos), spec.count(a) - 2);
            base[a] = b;
            cell[a] = pos - b;
        }
        const int corners = 1 << d;
        for (int c = 0; c < corners; ++c) {
            double wc = w;
            for (int a = 0; a < d; ++a) {
                const bool hi = (c >> a) & 1;
                wc *= hi ? cell[a] : (1.0 - cell[a]);
                idx0[a] = base[a] + (hi ? 1 : 0);
            }
            if (wc > 0.0) mass[spec.flat_index(idx0.data())] += wc;
        }
    });

    if (escaped > 1e-6)
        throw DomainExit("mccann: displacement at t = " + std::to_string(t) +
                             " pushes mass outside the grid rectangle",
                         escaped);
    return DiscreteMeasure::normalized(spec, std::move(mass));
}

namespace {

double path_distance(const DiscreteMeasure& a, const DiscreteMeasure& b, PathMetric metric,
                     const SinkhornSettings& settings) {
    double sq;
    if (metric == PathMetric::exact) {
        sq = a.spec().dim() == 1 ? w2_1d_discrete(a, b) : exact_w2_discrete(a, b);
    } else {
        sq = sinkhorn_divergence(a, b, settings);
    }
    return std::sqrt(std::max(sq, 0.0));
}

} // namespace

double geodesic_check(std::span<const DiscreteMeasure> path, std::span<const double> ts,
                      PathMetric metric, const SinkhornSettings& settings) {
    require(path.size() >= 3, "geodesic_check: need at least 3 measures");
    require(path.size() == ts.size(), "geodesic_check: one parameter per measure");
    const std::size_t n = path.size();
    const double span = std::abs(ts[n - 1] - ts[0]);
    require(span > 0.0, "geodesic_check: degenerate parameter range");
    const double lead = path_distance(path[0], path[n - 1], metric, settings);
    if (!(lead > 0.0)) throw std::invalid_argument("geodesic_check: degenerate path");

    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = path_distance(path[i], path[j], metric, settings);
            const double expected = std::abs(ts[i] - ts[j]) / span * lead;
            worst = std::max(worst, std::abs(d - expected) / lead);
        }
    return worst;
}

double geodesic_check(std::span<const QuantileCurve> path, std::span<const double> ts) {
    require(path.size() >= 3, "geodesic_check: need at least 3 measures");
    require(path.size() == ts.size(), "geodesic_check: one parameter per measure");
    const std::size_t n = path.size();
    const double span = std::abs(ts[n - 1] - ts[0]);
    require(span > 0.0, "geodesic_check: degenerate parameter range");
    const double lead = std::sqrt(std::max(w2_1d(path[0], path[n - 1]), 0.0));
    if (!(lead > 0.0)) throw std::invalid_argument("geodesic_check: degenerate path");

    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(std::max(w2_1d(path[i], path[j]), 0.0));
            const double expected = std::abs(ts[i] - ts[j]) / span * lead;
            worst = std::max(worst, std::abs(d - expected) / lead);
        }
    return worst;
}

} // namespace wassreg
