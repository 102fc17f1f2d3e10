#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wassreg/quantile.hpp"
#include "wassreg/sim.hpp"

using namespace wassreg;

TEST_SUITE("sim") {

TEST_CASE("one-dimensional generator is bitwise reproducible") {
    SimConfig1D config;
    config.n = 20;
    config.seed = 42;
    const Sim1DData a = generate_1d(config, 3);
    const Sim1DData b = generate_1d(config, 3);
    CHECK(a.x == b.x);
    REQUIRE(a.responses.size() == b.responses.size());
    for (std::size_t i = 0; i < a.responses.size(); ++i)
        CHECK(a.responses[i] == b.responses[i]);

    const Sim1DData c = generate_1d(config, 4);
    CHECK(a.x != c.x);
}

TEST_CASE("generator validation") {
    SimConfig1D config;
    config.n = 5;
    CHECK_THROWS_AS(generate_1d(config, 0), std::invalid_argument);
}

TEST_CASE("response medians equal their drawn centers") {
    // The location-scale family is symmetric about its center, so the
    // median of every generated response must match a numeric inversion of
    // its own CDF at 1/2 -- and the true model median is 0.4 + 0.2 x.
    for (double x : {0.0, 0.5, 1.0}) {
        const QuantileCurve truth = true_1d(x, 201);
        const double median = truth.value(100);
        CHECK(median == doctest::Approx(0.4 + 0.2 * x).epsilon(2e-3));
        CHECK(truth.mean() == doctest::Approx(0.4 + 0.2 * x).epsilon(2e-3));
    }
}

TEST_CASE("truth at x = 0 is the base bump centered at 0.4") {
    const DensityGrid d = true_density_1d(0.0, 801);
    // Peak at 0.4; support approximately [0.4 - 0.2236, 0.4 + 0.2236].
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < d.values().size(); ++k)
        if (d.values()[k] > d.values()[argmax]) argmax = k;
    CHECK(d.spec().coordinate(0, static_cast<int>(argmax)) == doctest::Approx(0.4).epsilon(1e-2));
    CHECK(d.values()[0] == 0.0);
    CHECK(d.values()[d.values().size() - 1] == 0.0);
}

TEST_CASE("squared distance between the ends of the truth path") {
    // Location difference 0.2 dominates; the scale term adds ~1e-6.
    const QuantileCurve t0 = true_1d(0.0, 801);
    const QuantileCurve t1 = true_1d(1.0, 801);
    const double w2 = w2_1d(t0, t1);
    CHECK(w2 == doctest::Approx(0.04).epsilon(0.01));
    CHECK(w2 > 0.04); // the scale mismatch contributes on top of the shift
}

TEST_CASE("truth is defined on the extrapolation range and fails beyond") {
    CHECK_NOTHROW(true_1d(-0.5, 101));
    CHECK_NOTHROW(true_1d(1.5, 101));
    CHECK_THROWS_AS(true_1d(4.0, 101), std::invalid_argument);
}

TEST_CASE("quadrature: 21 nodes per unit interval, trapezoid weights") {
    const Quadrature qi = region_quadrature(Region::interpolation);
    REQUIRE(qi.xs.size() == 21);
    CHECK(qi.xs.front() == 0.0);
    CHECK(qi.xs.back() == 1.0);
    double total = 0.0;
    for (double w : qi.weights) total += w;
    CHECK(total == doctest::Approx(1.0));

    const Quadrature qe = region_quadrature(Region::extrapolation);
    REQUIRE(qe.xs.size() == 22);
    double total_e = 0.0;
    for (double w : qe.weights) total_e += w;
    CHECK(total_e == doctest::Approx(1.0)); // two half-unit intervals
}

TEST_CASE("emiwe vanishes when the fit equals the truth") {
    const Quadrature quad = region_quadrature(Region::interpolation);
    std::vector<QuantileCurve> truth;
    for (double x : quad.xs) truth.push_back(true_1d(x, 101));
    const std::vector<std::vector<QuantileCurve>> fits{truth, truth};
    CHECK(emiwe(fits, truth, quad) == 0.0);

    std::vector<QuantileCurve> short_path(truth.begin(), truth.end() - 1);
    const std::vector<std::vector<QuantileCurve>> bad{short_path};
    CHECK_THROWS_AS(emiwe(bad, truth, quad), std::invalid_argument);
}

TEST_CASE("two-dimensional generator is reproducible and respects the mean path") {
    SimConfig2D config;
    config.n = 12;
    config.grid_points = 21;
    config.seed = 9;
    const Sim2DData a = generate_2d(config, 1);
    const Sim2DData b = generate_2d(config, 1);
    CHECK(a.x == b.x);
    for (std::size_t i = 0; i < a.responses.size(); ++i)
        CHECK(a.responses[i].mass() == b.responses[i].mass());
    CHECK(a.floored_eigen_draws == 0); // the eigenvalue law sits far from the floor

    const GridSpec spec = GridSpec::square2d(0.0, 1.0, 41);
    const DiscreteMeasure truth = true_2d(0.5, spec);
    const std::vector<double> mean = truth.mean();
    CHECK(mean[0] == doctest::Approx(0.5).epsilon(0.01));
    CHECK(mean[1] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("truth covariance is aligned with the diagonals") {
    const GridSpec spec = GridSpec::square2d(0.0, 1.0, 51);
    const DiscreteMeasure truth = true_2d(0.8, spec);
    const std::vector<double> mean = truth.mean();
    double c00 = 0.0, c01 = 0.0, c11 = 0.0;
    int idx[2];
    for (std::size_t k = 0; k < truth.mass().size(); ++k) {
        truth.spec().axis_indices(k, idx);
        const double z0 = truth.spec().coordinate(0, idx[0]) - mean[0];
        const double z1 = truth.spec().coordinate(1, idx[1]) - mean[1];
        const double m = truth.mass()[k];
        c00 += m * z0 * z0;
        c01 += m * z0 * z1;
        c11 += m * z1 * z1;
    }
    // V diag(eig) V' with eig = (0.014, 0.006): equal variances on the axes
    // and covariance (eig2 - eig1) / 2 = -0.004.
    CHECK(c00 == doctest::Approx(0.01).epsilon(0.08));
    CHECK(c11 == doctest::Approx(0.01).epsilon(0.08));
    CHECK(c01 == doctest::Approx(-0.004).epsilon(0.15));
}

TEST_CASE("heavy-tailed preset keeps the location structure") {
    const GridSpec spec = GridSpec::square2d(0.0, 1.0, 31);
    const DiscreteMeasure truth = true_2d(0.5, spec, SimConfig2D::Family::multivariate_t);
    const std::vector<double> mean = truth.mean();
    CHECK(mean[0] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(mean[1] == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("emise of the truth equals the reported entropic floor") {
    const GridSpec spec = GridSpec::square2d(0.0, 1.0, 21);
    Quadrature quad;
    quad.xs = {0.25, 0.5, 0.75};
    quad.weights = {0.25, 0.5, 0.25};
    std::vector<DiscreteMeasure> truth;
    for (double x : quad.xs) truth.push_back(true_2d(x, spec));
    const std::vector<std::vector<DiscreteMeasure>> fits{truth};
    const double value = emise(fits, truth, quad, 0.4);
    const double floor = emise_floor(truth, quad, 0.4);
    CHECK(value == doctest::Approx(floor).epsilon(1e-9));
    CHECK(floor > 0.0); // entropic bias, not zero
}

TEST_CASE("table-1 runner at toy scale is deterministic") {
    SimConfig1D config;
    config.n = 15;
    config.mc_runs = 2;
    config.seed = 11;
    config.density_grid_points = 201;
    config.quantile_points = 101;
    std::vector<Run1DMetrics> runs_a, runs_b;
    const Table1Row a = run_table1_row(config, &runs_a);
    const Table1Row b = run_table1_row(config, &runs_b);
    CHECK(a.global_interp == b.global_interp);
    CHECK(a.global_extrap == b.global_extrap);
    CHECK(a.local_interp == b.local_interp);
    CHECK(a.global_interp > 0.0);
    REQUIRE(runs_a.size() == 2);
    CHECK(runs_a[0].global_interp == runs_b[0].global_interp);
    CHECK(runs_a[1].local_interp == runs_b[1].local_interp);
}

} // TEST_SUITE
