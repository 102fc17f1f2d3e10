#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wassreg/grid.hpp"
#include "wassreg/quantile.hpp"

namespace wassreg {

// ---------------------------------------------------------------------------
// One-dimensional study: responses are location-scale copies of a parabolic
// bump on [0, 1]. The conditional barycenter at x has center 0.4 + 0.2 x and
// scale sqrt(1 + 0.02 x) on the base shape, which stays inside [0, 1] for
// x in [-0.5, 1.5].

struct SimConfig1D {
    int n = 100;
    int quantile_points = 201;
    int density_grid_points = 801;
    int mc_runs = 100;
    std::uint64_t seed = 1;
    double local_bandwidth = 0.1;

    void validate() const;
};

struct Sim1DData {
    std::vector<double> x;
    std::vector<QuantileCurve> responses;
    std::size_t truncated_scale_draws = 0;
};

//! Deterministic per-run sample: X_i uniform on [0, 1], responses drawn
//! from the location-scale family with center law N(0.4 + 0.2x, 0.01) and
//! squared-scale law N(1 + 0.02x, 0.01) floored at 1e-4, truncated to [0,1].
Sim1DData generate_1d(const SimConfig1D& config, int run_index);

//! Density of the conditional barycenter at x on a [0, 1] grid. Throws when
//! the support would leave [0, 1] (x far outside [-0.5, 1.5]).
DensityGrid true_density_1d(double x, int grid_points);

QuantileCurve true_1d(double x, int quantile_points, int density_grid_points = 801);

// ---------------------------------------------------------------------------
// Predictor quadrature for the error integrals: trapezoid rule, 21 nodes per
// unit interval. Interpolation integrates over [0, 1]; extrapolation over
// [-0.5, 0] and [1, 1.5].

enum class Region { interpolation, extrapolation };

struct Quadrature {
    std::vector<double> xs;
    std::vector<double> weights;
};

Quadrature region_quadrature(Region region);

//! Empirical mean integrated squared-Wasserstein error: the Monte Carlo
//! average over runs of the quadrature of W2^2(fit, truth).
double emiwe(std::span<const std::vector<QuantileCurve>> fits_per_run,
             std::span<const QuantileCurve> truth, const Quadrature& quad);

struct Run1DMetrics {
    double global_interp, global_extrap, local_interp;
};

struct Table1Row {
    int n;
    double global_extrap, global_interp, local_interp;
};

//! Full study at one sample size; Monte Carlo runs execute in parallel and
//! per_run (when non-null) receives one row per run in run order.
Table1Row run_table1_row(const SimConfig1D& config, std::vector<Run1DMetrics>* per_run = nullptr);

// ---------------------------------------------------------------------------
// Two-dimensional study: truncated Gaussian responses on [0, 1]^2 with mean
// path (0.4x + 0.3, 0.4x + 0.3) and covariance V diag(1 + 0.5x, 1 - 0.5x) V'
// / 100 in the 45-degree-rotated frame. The heavy-tailed preset keeps the
// same location/scale structure with a bivariate t(2) profile.

struct SimConfig2D {
    enum class Family { gaussian, multivariate_t };

    int n = 50;
    int grid_points = 101;
    double lambda = 0.4;
    int mc_runs = 20;
    std::uint64_t seed = 1;
    double local_bandwidth = 0.1;
    //! Marginal-violation stop for the barycenter solves; the error-metric
    //! divergences always run at the solver default.
    double solver_tolerance = 3e-4;
    Family family = Family::gaussian;

    void validate() const;
};

struct Sim2DData {
    std::vector<double> x;
    std::vector<DiscreteMeasure> responses;
    std::size_t floored_eigen_draws = 0;
};

Sim2DData generate_2d(const SimConfig2D& config, int run_index);

//! Noise-free parameter path: the response family evaluated at the
//! conditional-mean parameters and discretized.
DiscreteMeasure true_2d(double x, const GridSpec& spec,
                        SimConfig2D::Family family = SimConfig2D::Family::gaussian);

//! Empirical mean integrated Sinkhorn error at the given lambda.
double emise(std::span<const std::vector<DiscreteMeasure>> fits_per_run,
             std::span<const DiscreteMeasure> truth, const Quadrature& quad, double lambda);

//! Self-divergence of the truth path: the entropic-bias floor that emise
//! cannot go below even for a perfect fit.
double emise_floor(std::span<const DiscreteMeasure> truth, const Quadrature& quad, double lambda);

struct Run2DMetrics {
    double global_interp, global_extrap, local_interp;
};

struct Table2Row {
    int n;
    double global_extrap, global_interp, local_interp;
    double floor_interp;
};

Table2Row run_table2_row(const SimConfig2D& config, std::vector<Run2DMetrics>* per_run = nullptr);

} // namespace wassreg
