#include "wassreg/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wassreg/frechet.hpp"
#include "wassreg/parallel.hpp"
#include "wassreg/regression.hpp"
#include "wassreg/rng.hpp"
#include "wassreg/sinkhorn.hpp"

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Base shape: density proportional to max(0, 0.05 - u^2), a parabolic bump
// with half-width sqrt(0.05) and standard deviation 0.1.
constexpr double kBumpHalfWidth = 0.223606797749978969; // sqrt(0.05)

double truth_center_1d(double x) { return 0.4 + 0.2 * x; }
double truth_scale_1d(double x) { return std::sqrt(1.0 + 0.02 * x); }

//! Location-scale copy of the bump on a [0, 1] grid, truncated to the grid
//! and renormalized.
DensityGrid bump_density(double center, double scale, int grid_points) {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, grid_points);
    std::vector<double> values(spec.size());
    bool any = false;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double u = (spec.coordinate(0, static_cast<int>(k)) - center) / scale;
        const double v = std::max(0.0, 0.05 - u * u) / scale;
        values[k] = v;
        any = any || v > 0.0;
    }
    require(any, "bump density: support leaves the [0, 1] domain entirely");
    return DensityGrid::normalized(std::move(spec), std::move(values));
}

} // namespace

void SimConfig1D::validate() const {
    require(n >= 10, "sim1d: n must be at least 10");
    require(mc_runs >= 1, "sim1d: need at least one Monte Carlo run");
    require(quantile_points >= 3, "sim1d: quantile resolution too small");
    require(density_grid_points >= 51, "sim1d: density grid too coarse");
    require(local_bandwidth > 0.0, "sim1d: bandwidth must be positive");
}

Sim1DData generate_1d(const SimConfig1D& config, int run_index) {
    config.validate();
    Rng rng = Rng::for_run(config.seed, static_cast<std::uint64_t>(run_index));

    Sim1DData data;
    data.x.resize(config.n);
    for (int i = 0; i < config.n; ++i) data.x[i] = rng.uniform();

    data.responses.reserve(config.n);
    for (int i = 0; i < config.n; ++i) {
        const double x = data.x[i];
        // Center and squared-scale draws around the conditional-mean paths.
        // The location noise is 0.01 plus the part the scale noise feeds
        // into the center of a non-centered base shape; the squared-scale
        // noise keeps the scale law's coefficient of variation.
        const double scale_var = 0.0208333 / (1.0 + x);
        const double center_sd = std::sqrt(0.01 + 0.16 * scale_var);
        const double alpha = rng.gaussian(truth_center_1d(x), center_sd);
        const double s2_sd = std::sqrt(4.0 * (1.0 + 0.02 * x) * scale_var);
        double s2 = rng.gaussian(1.0 + 0.02 * x, s2_sd);
        if (s2 < 1e-4) {
            s2 = 1e-4;
            ++data.truncated_scale_draws;
        }
        const DensityGrid density = bump_density(alpha, std::sqrt(s2), config.density_grid_points);
        data.responses.push_back(quantile_from_density(density, config.quantile_points));
    }
    return data;
}

DensityGrid true_density_1d(double x, int grid_points) {
    const double c = truth_center_1d(x);
    const double s = truth_scale_1d(x);
    const double lo = c - kBumpHalfWidth * s;
    const double hi = c + kBumpHalfWidth * s;
    if (lo < -1e-12 || hi > 1.0 + 1e-12)
        throw std::invalid_argument("true_1d: support exits [0, 1] at x = " + std::to_string(x));
    return bump_density(c, s, grid_points);
}

QuantileCurve true_1d(double x, int quantile_points, int density_grid_points) {
    return quantile_from_density(true_density_1d(x, density_grid_points), quantile_points);
}

Quadrature region_quadrature(Region region) {
    // Trapezoid nodes, 21 per unit interval (step 0.05).
    auto trapezoid = [](double lo, double hi, int points, Quadrature& q) {
        const double h = (hi - lo) / (points - 1);
        for (int j = 0; j < points; ++j) {
            q.xs.push_back(lo + j * h);
            q.weights.push_back(h * ((j == 0 || j == points - 1) ? 0.5 : 1.0));
        }
    };
    Quadrature q;
    if (region == Region::interpolation) {
        trapezoid(0.0, 1.0, 21, q);
    } else {
        trapezoid(-0.5, 0.0, 11, q);
        trapezoid(1.0, 1.5, 11, q);
    }
    return q;
}

double emiwe(std::span<const std::vector<QuantileCurve>> fits_per_run,
             std::span<const QuantileCurve> truth, const Quadrature& quad) {
    require(!fits_per_run.empty(), "emiwe: need at least one run");
    require(truth.size() == quad.xs.size(), "emiwe: truth path and quadrature sizes differ");
    double total = 0.0;
    for (const std::vector<QuantileCurve>& fits : fits_per_run) {
        require(fits.size() == quad.xs.size(), "emiwe: fit path and quadrature sizes differ");
        for (std::size_t j = 0; j < quad.xs.size(); ++j)
            total += quad.weights[j] * w2_1d(fits[j], truth[j]);
    }
    return total / static_cast<double>(fits_per_run.size());
}

Table1Row run_table1_row(const SimConfig1D& config, std::vector<Run1DMetrics>* per_run) {
    config.validate();
    const Quadrature quad_i = region_quadrature(Region::interpolation);
    const Quadrature quad_e = region_quadrature(Region::extrapolation);

    std::vector<QuantileCurve> truth_i, truth_e;
    for (double x : quad_i.xs)
        truth_i.push_back(true_1d(x, config.quantile_points, config.density_grid_points));
    for (double x : quad_e.xs)
        truth_e.push_back(true_1d(x, config.quantile_points, config.density_grid_points));

    std::vector<Run1DMetrics> runs(config.mc_runs);
    parallel_for(static_cast<std::size_t>(config.mc_runs), [&](std::size_t l) {
        const Sim1DData data = generate_1d(config, static_cast<int>(l));
        PredictorSample predictors = PredictorSample::from_scalar(data.x);

        const FittedModel global =
            FittedModel::exact1d(predictors, data.responses, FitMode::global);
        const FittedModel local = FittedModel::exact1d(
            predictors, data.responses, FitMode::local,
            KernelSpec(KernelFamily::gaussian, {config.local_bandwidth}));

        // Local fits fall back to the nearest reachable design point on the
        // rare runs where a boundary quadrature node is out of kernel reach.
        const auto [xlo, xhi] = predictors.range(0);
        auto fit_path = [&](const FittedModel& model, const Quadrature& quad, bool local_mode) {
            std::vector<QuantileCurve> fits;
            fits.reserve(quad.xs.size());
            for (double x : quad.xs) {
                if (local_mode) {
                    const double reach = config.local_bandwidth;
                    if (x < xlo - reach || x > xhi + reach) x = std::clamp(x, xlo, xhi);
                }
                fits.push_back(std::get<QuantileCurve>(model.predict(x)));
            }
            return fits;
        };
        const std::vector<QuantileCurve> gi = fit_path(global, quad_i, false);
        const std::vector<QuantileCurve> ge = fit_path(global, quad_e, false);
        const std::vector<QuantileCurve> li = fit_path(local, quad_i, true);

        runs[l].global_interp = emiwe({&gi, 1}, truth_i, quad_i);
        runs[l].global_extrap = emiwe({&ge, 1}, truth_e, quad_e);
        runs[l].local_interp = emiwe({&li, 1}, truth_i, quad_i);
    });

    Table1Row row{config.n, 0.0, 0.0, 0.0};
    for (const Run1DMetrics& r : runs) {
        row.global_extrap += r.global_extrap;
        row.global_interp += r.global_interp;
        row.local_interp += r.local_interp;
    }
    row.global_extrap /= config.mc_runs;
    row.global_interp /= config.mc_runs;
    row.local_interp /= config.mc_runs;
    if (per_run) *per_run = std::move(runs);
    return row;
}

// ---------------------------------------------------------------------------
// Two-dimensional study

namespace {

// Rotation by 45 degrees: columns are the covariance eigenvectors.
constexpr double kHalfSqrt2 = 0.70710678118654752;

double truth_mean_2d(double x) { return 0.4 * x + 0.3; }

void truth_eigenvalues_2d(double x, double* eig) {
    eig[0] = (1.0 + 0.5 * x) / 100.0;
    eig[1] = (1.0 - 0.5 * x) / 100.0;
}

//! Density profile of the family on the grid: Gaussian or bivariate t(2),
//! with covariance structure V diag(eig) V'. Values below 1e-12 of the peak
//! are truncated to exact zeros; they carry no probability worth keeping
//! and exact zeros keep the scaling solvers inside the linear domain.
DensityGrid family_density_2d(const double* mean, const double* eig, SimConfig2D::Family family,
                              const GridSpec& spec) {
    require(eig[0] > 0.0 && eig[1] > 0.0, "sim2d: eigenvalues must be positive");
    std::vector<double> values(spec.size());
    const int n1 = spec.count(1);
    double peak = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const int i0 = static_cast<int>(k) / n1;
        const int i1 = static_cast<int>(k) % n1;
        const double z0 = spec.coordinate(0, i0) - mean[0];
        const double z1 = spec.coordinate(1, i1) - mean[1];
        // Coordinates in the rotated eigenframe.
        const double e0 = kHalfSqrt2 * (z0 - z1);
        const double e1 = kHalfSqrt2 * (z0 + z1);
        const double q = e0 * e0 / eig[0] + e1 * e1 / eig[1];
        values[k] = family == SimConfig2D::Family::gaussian
                        ? std::exp(-0.5 * q)
                        : std::pow(1.0 + 0.5 * q, -2.0);
        peak = std::max(peak, values[k]);
    }
    const double clip = 1e-12 * peak;
    for (double& v : values)
        if (v < clip) v = 0.0;
    return DensityGrid::normalized(spec, std::move(values));
}

} // namespace

void SimConfig2D::validate() const {
    require(n >= 10, "sim2d: n must be at least 10");
    require(grid_points >= 21, "sim2d: grid must be at least 21 per axis");
    require(lambda > 0.0 && lambda <= 4.0, "sim2d: lambda must be in (0, 4]");
    require(mc_runs >= 1, "sim2d: need at least one Monte Carlo run");
    require(local_bandwidth > 0.0, "sim2d: bandwidth must be positive");
    require(solver_tolerance > 0.0, "sim2d: solver tolerance must be positive");
}

Sim2DData generate_2d(const SimConfig2D& config, int run_index) {
    config.validate();
    Rng rng = Rng::for_run(config.seed ^ 0x2d2d2d2dULL, static_cast<std::uint64_t>(run_index));
    const GridSpec spec = GridSpec::square2d(0.0, 1.0, config.grid_points);

    Sim2DData data;
    data.x.resize(config.n);
    for (int i = 0; i < config.n; ++i) data.x[i] = rng.uniform();

    data.responses.reserve(config.n);
    for (int i = 0; i < config.n; ++i) {
        const double x = data.x[i];
        double eig[2];
        truth_eigenvalues_2d(x, eig);
        for (double& e : eig) {
            e += 0.001 * rng.gaussian();
            if (e < 1e-4) {
                e = 1e-4;
                ++data.floored_eigen_draws;
            }
        }
        // Location draw with the response's own covariance.
        const double g0 = rng.gaussian(), g1 = rng.gaussian();
        const double p0 = std::sqrt(eig[0]) * g0;
        const double p1 = std::sqrt(eig[1]) * g1;
        const double mean[2] = {truth_mean_2d(x) + kHalfSqrt2 * (p0 + p1),
                                truth_mean_2d(x) + kHalfSqrt2 * (-p0 + p1)};
        data.responses.push_back(
            discretize(family_density_2d(mean, eig, config.family, spec)));
    }
    return data;
}

DiscreteMeasure true_2d(double x, const GridSpec& spec, SimConfig2D::Family family) {
    double eig[2];
    truth_eigenvalues_2d(x, eig);
    const double mean[2] = {truth_mean_2d(x), truth_mean_2d(x)};
    return discretize(family_density_2d(mean, eig, family, spec));
}

double emise(std::span<const std::vector<DiscreteMeasure>> fits_per_run,
             std::span<const DiscreteMeasure> truth, const Quadrature& quad, double lambda) {
    require(!fits_per_run.empty(), "emise: need at least one run");
    require(truth.size() == quad.xs.size(), "emise: truth path and quadrature sizes differ");
    SinkhornSettings settings;
    settings.lambda = lambda;
    double total = 0.0;
    for (const std::vector<DiscreteMeasure>& fits : fits_per_run) {
        require(fits.size() == quad.xs.size(), "emise: fit path and quadrature sizes differ");
        for (std::size_t j = 0; j < quad.xs.size(); ++j)
            total += quad.weights[j] * sinkhorn_divergence(fits[j], truth[j], settings);
    }
    return total / static_cast<double>(fits_per_run.size());
}

double emise_floor(std::span<const DiscreteMeasure> truth, const Quadrature& quad, double lambda) {
    require(truth.size() == quad.xs.size(), "emise_floor: truth path and quadrature sizes differ");
    SinkhornSettings settings;
    settings.lambda = lambda;
    double total = 0.0;
    for (std::size_t j = 0; j < quad.xs.size(); ++j)
        total += quad.weights[j] * sinkhorn_divergence(truth[j], truth[j], settings);
    return total;
}

Table2Row run_table2_row(const SimConfig2D& config, std::vector<Run2DMetrics>* per_run) {
    config.validate();
    const GridSpec spec = GridSpec::square2d(0.0, 1.0, config.grid_points);
    const Quadrature quad_i = region_quadrature(Region::interpolation);
    const Quadrature quad_e = region_quadrature(Region::extrapolation);

    std::vector<DiscreteMeasure> truth_i, truth_e;
    for (double x : quad_i.xs) truth_i.push_back(true_2d(x, spec, config.family));
    for (double x : quad_e.xs) truth_e.push_back(true_2d(x, spec, config.family));

    SinkhornSettings settings;
    settings.lambda = config.lambda;
    settings.tolerance = config.solver_tolerance;

    std::vector<Run2DMetrics> runs(config.mc_runs);
    parallel_for(static_cast<std::size_t>(config.mc_runs), [&](std::size_t l) {
        const Sim2DData data = generate_2d(config, static_cast<int>(l));
        PredictorSample predictors = PredictorSample::from_scalar(data.x);
        const KernelSpec kernel(KernelFamily::gaussian, {config.local_bandwidth});

        // One solver per run: its scaling state depends only on the
        // responses, so all three fit paths share the warm start. Ascending
        // solve order keeps successive weight vectors close. Local fits
        // fall back to the nearest reachable design point on the rare runs
        // where a boundary quadrature node is out of kernel reach.
        SinkhornBarycenterSolver solver(data.responses, settings);
        const auto [xlo, xhi] = predictors.range(0);
        auto fit_path = [&](const Quadrature& quad, bool local) {
            std::vector<std::size_t> order(quad.xs.size());
            for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return quad.xs[a] < quad.xs[b]; });
            std::vector<DiscreteMeasure> fits(quad.xs.size(), truth_i[0]);
            for (std::size_t j : order) {
                double x = quad.xs[j];
                if (local && (x < xlo - config.local_bandwidth || x > xhi + config.local_bandwidth))
                    x = std::clamp(x, xlo, xhi);
                const std::vector<double> w =
                    local ? local_weights(predictors, {&x, 1}, kernel)
                          : global_weights(predictors, {&x, 1});
                fits[j] = solver.solve(w);
            }
            return fits;
        };

        const std::vector<DiscreteMeasure> gi = fit_path(quad_i, false);
        const std::vector<DiscreteMeasure> ge = fit_path(quad_e, false);
        const std::vector<DiscreteMeasure> li = fit_path(quad_i, true);

        runs[l].global_interp = emise({&gi, 1}, truth_i, quad_i, config.lambda);
        runs[l].global_extrap = emise({&ge, 1}, truth_e, quad_e, config.lambda);
        runs[l].local_interp = emise({&li, 1}, truth_i, quad_i, config.lambda);
    });

    Table2Row row{config.n, 0.0, 0.0, 0.0, 0.0};
    for (const Run2DMetrics& r : runs) {
        row.global_extrap += r.global_extrap;
        row.global_interp += r.global_interp;
        row.local_interp += r.local_interp;
    }
    row.global_extrap /= config.mc_runs;
    row.global_interp /= config.mc_runs;
    row.local_interp /= config.mc_runs;
    row.floor_interp = emise_floor(truth_i, quad_i, config.lambda);
    if (per_run) *per_run = std::move(runs);
    return row;
}

} // namespace wassreg
