#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "wassreg/frechet.hpp"
#include "wassreg/grid.hpp"
#include "wassreg/quantile.hpp"
#include "wassreg/sinkhorn.hpp"

namespace wassreg {

enum class FitMode { global, local };
enum class SolverKind { exact1d, sinkhorn };

//! A prediction is a quantile curve in exact 1-D mode and a mass vector on
//! the shared grid in Sinkhorn mode.
using Prediction = std::variant<QuantileCurve, DiscreteMeasure>;

//! Predictor sample plus distributional responses plus the weight recipe
//! and solver choice. Responses are quantile curves for the exact 1-D
//! solver and discrete measures on one shared grid for the Sinkhorn solver.
class FittedModel {
public:
    static FittedModel exact1d(PredictorSample predictors, std::vector<QuantileCurve> responses,
                               FitMode mode, std::optional<KernelSpec> kernel = std::nullopt);

    static FittedModel sinkhorn(PredictorSample predictors, std::vector<DiscreteMeasure> responses,
                                FitMode mode, SinkhornSettings settings,
                                std::optional<KernelSpec> kernel = std::nullopt);

    const PredictorSample& predictors() const { return predictors_; }
    FitMode mode() const { return mode_; }
    SolverKind solver() const { return solver_; }
    const SinkhornSettings& settings() const { return settings_; }
    const std::vector<QuantileCurve>& quantile_responses() const { return quantile_responses_; }
    const std::vector<DiscreteMeasure>& measure_responses() const { return measure_responses_; }

    //! Fréchet weights at x: global weights, or local kernel weights after
    //! checking that x lies inside the design hull.
    std::vector<double> weights_at(std::span<const double> x) const;

    //! Conditional barycenter estimate at x. In local mode x must lie in
    //! the design hull; local fitting does not extrapolate.
    Prediction predict(std::span<const double> x) const;
    Prediction predict(double x) const;

private:
    FittedModel() = default;

    PredictorSample predictors_{std::vector<double>{0.0, 1.0}, 2, 1};
    std::vector<QuantileCurve> quantile_responses_;
    std::vector<DiscreteMeasure> measure_responses_;
    FitMode mode_ = FitMode::global;
    SolverKind solver_ = SolverKind::exact1d;
    std::optional<KernelSpec> kernel_;
    SinkhornSettings settings_;
};

//! Elementwise predict; a failure at element k is rethrown with the index
//! in the message and nothing is returned.
std::vector<Prediction> predict_path(const FittedModel& model,
                                     std::span<const std::vector<double>> xs);

//! Displacement interpolation between two measures on a shared grid: a
//! transport plan is computed (exact LP when both supports are within the
//! oracle cap, a sharp Sinkhorn plan otherwise), each plan atom is moved to
//! (1-t) from + t to, and the displaced atoms are binned back onto the grid
//! with multilinear weights. t outside [0, 1] extends the geodesic; mass
//! pushed outside the grid rectangle raises DomainExit.
DiscreteMeasure mccann_interpolate(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t,
                                   const SinkhornSettings& settings = {});

enum class PathMetric { exact, sinkhorn };

//! Largest relative deviation of pairwise distances from the constant-speed
//! identity d(nu(t_i), nu(t_j)) = |t_i - t_j| d(first, last). The exact
//! metric uses the monotone coupling in 1-D and the LP oracle otherwise.
double geodesic_check(std::span<const DiscreteMeasure> path, std::span<const double> ts,
                      PathMetric metric, const SinkhornSettings& settings = {});

double geodesic_check(std::span<const QuantileCurve> path, std::span<const double> ts);

} // namespace wassreg
