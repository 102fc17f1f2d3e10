#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "wassreg/grid.hpp"
#include "wassreg/quantile.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;

namespace {

DensityGrid density_on(double lo, double hi, int points, const std::function<double(double)>& f) {
    GridSpec spec = GridSpec::uniform1d(lo, hi, points);
    std::vector<double> values(spec.size());
    for (std::size_t k = 0; k < values.size(); ++k)
        values[k] = std::max(0.0, f(spec.coordinate(0, static_cast<int>(k))));
    return DensityGrid::normalized(std::move(spec), std::move(values));
}

//! Exhaustive oracle for the uniform-weight isotonic projection on a small
//! vector: every consecutive block partition is scored with its blockwise
//! means; the feasible minimum is the projection.
std::vector<double> brute_force_isotonic(const std::vector<double>& a) {
    const int n = static_cast<int>(a.size());
    std::vector<double> best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
        // Bit b set means a block boundary between b and b+1.
        std::vector<double> candidate(a.size());
        int start = 0;
        bool feasible = true;
        double prev_mean = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const bool boundary = i == n - 1 || ((mask >> i) & 1u);
            if (!boundary) continue;
            double mean = 0.0;
            for (int j = start; j <= i; ++j) mean += a[j];
            mean /= (i - start + 1);
            if (mean < prev_mean) {
                feasible = false;
                break;
            }
            for (int j = start; j <= i; ++j) candidate[j] = mean;
            prev_mean = mean;
            start = i + 1;
        }
        if (!feasible) continue;
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += (candidate[j] - a[j]) * (candidate[j] - a[j]);
        if (obj < best_obj) {
            best_obj = obj;
            best = candidate;
        }
    }
    return best;
}

QuantileCurve random_monotone_curve(Rng& rng, int p, double lo, double hi) {
    std::vector<double> steps(p);
    double total = 0.0;
    for (double& s : steps) {
        s = rng.uniform(0.0, 1.0);
        total += s;
    }
    std::vector<double> q(p);
    double run = rng.uniform(0.0, 0.05) * (hi - lo);
    const double room = (hi - lo) * rng.uniform(0.5, 0.9);
    for (int j = 0; j < p; ++j) {
        run += steps[j] / total * room;
        q[j] = lo + std::min(run, hi - lo);
    }
    return QuantileCurve(std::move(q), lo, hi);
}

} // namespace

TEST_SUITE("quantile") {

TEST_CASE("uniform density has the identity quantile") {
    const DensityGrid d = density_on(0.0, 1.0, 101, [](double) { return 1.0; });
    const QuantileCurve q = quantile_from_density(d, 201);
    for (std::size_t j = 0; j < q.points(); ++j) {
        const double t = static_cast<double>(j) / (q.points() - 1);
        CHECK(q.value(j) == doctest::Approx(t).epsilon(1e-6));
    }
}

TEST_CASE("uniform on [a, b] has the affine quantile") {
    const double a = -1.5, b = 2.0;
    const DensityGrid d = density_on(a, b, 141, [](double) { return 1.0; });
    const QuantileCurve q = quantile_from_density(d, 101);
    for (std::size_t j = 0; j < q.points(); ++j) {
        const double t = static_cast<double>(j) / (q.points() - 1);
        CHECK(q.value(j) == doctest::Approx(a + (b - a) * t).epsilon(1e-9));
    }
}

TEST_CASE("parabolic bump centered at 0.4 has median 0.4 within a grid step") {
    const int points = 201;
    const DensityGrid d =
        density_on(0.0, 1.0, points, [](double w) { return 0.05 - (w - 0.4) * (w - 0.4); });
    const QuantileCurve q = quantile_from_density(d, 201);
    const double step = 1.0 / (points - 1);
    CHECK(std::abs(q.value(100) - 0.4) <= step);
}

TEST_CASE("w2: zero, pure shift, and the Gaussian closed form") {
    const DensityGrid base =
        density_on(-0.6, 1.0, 3201, [](double w) { return std::exp(-0.5 * w * w / 0.01); });
    const QuantileCurve qa = quantile_from_density(base, 4001);
    CHECK(w2_1d(qa, qa) == 0.0);

    std::vector<double> shifted(qa.values());
    for (double& v : shifted) v += 0.5;
    const QuantileCurve qb(shifted, qa.support_lo(), qa.support_hi() + 0.5);
    CHECK(w2_1d(qa, qb) == doctest::Approx(0.25).epsilon(1e-12));

    // N(0, 0.01) vs N(0.2, 0.04): mean-diff^2 + sd-diff^2 = 0.04 + 0.01.
    const DensityGrid other = density_on(-0.6, 1.0, 3201, [](double w) {
        return std::exp(-0.5 * (w - 0.2) * (w - 0.2) / 0.04);
    });
    const QuantileCurve qc = quantile_from_density(other, 4001);
    CHECK(w2_1d(qa, qc) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("w2 rejects mismatched quantile resolution") {
    const DensityGrid d = density_on(0.0, 1.0, 41, [](double) { return 1.0; });
    CHECK_THROWS_AS(w2_1d(quantile_from_density(d, 101), quantile_from_density(d, 201)),
                    std::invalid_argument);
}

TEST_CASE("w2 behaves like a squared metric on random curves") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const QuantileCurve a = random_monotone_curve(rng, 61, 0.0, 1.0);
        const QuantileCurve b = random_monotone_curve(rng, 61, 0.0, 1.0);
        const QuantileCurve c = random_monotone_curve(rng, 61, 0.0, 1.0);
        const double ab = std::sqrt(w2_1d(a, b));
        CHECK(ab == doctest::Approx(std::sqrt(w2_1d(b, a))).epsilon(1e-12));
        CHECK(w2_1d(a, a) == 0.0);
        CHECK(ab <= std::sqrt(w2_1d(a, c)) + std::sqrt(w2_1d(c, b)) + 1e-12);
    }
}

TEST_CASE("isotonic projection matches the exhaustive oracle") {
    // Average of Q1(t) = t and Q2(t) = t^2 with weights (-0.5, 2.5).
    const int p = 11;
    std::vector<double> avg(p);
    for (int j = 0; j < p; ++j) {
        const double t = static_cast<double>(j) / (p - 1);
        avg[j] = 0.5 * (-0.5 * t + 2.5 * t * t);
    }
    const std::vector<double> pav = isotonic_projection(avg);
    const std::vector<double> oracle = brute_force_isotonic(avg);
    REQUIRE(oracle.size() == pav.size());
    for (int j = 0; j < p; ++j) CHECK(pav[j] == doctest::Approx(oracle[j]).epsilon(1e-6));

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(9);
        for (double& v : a) v = rng.uniform(-1.0, 1.0);
        const std::vector<double> got = isotonic_projection(a);
        const std::vector<double> want = brute_force_isotonic(a);
        for (std::size_t j = 0; j < a.size(); ++j)
            CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-9));
    }
}

TEST_CASE("projection is no farther from the average than random monotone curves") {
    Rng rng(23);
    const int p = 41;
    std::vector<double> avg(p);
    for (int j = 0; j < p; ++j) {
        const double t = static_cast<double>(j) / (p - 1);
        avg[j] = t + 0.3 * std::sin(9.0 * t); // non-monotone
    }
    const std::vector<double> proj = isotonic_projection(avg);
    for (int j = 1; j < p; ++j) CHECK(proj[j] >= proj[j - 1]);

    auto dist2 = [&](const std::vector<double>& q) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) s += (q[j] - avg[j]) * (q[j] - avg[j]);
        return s;
    };
    const double d_proj = dist2(proj);
    for (int trial = 0; trial < 100; ++trial) {
        const QuantileCurve q = random_monotone_curve(rng, p, -0.5, 1.8);
        CHECK(d_proj <= dist2(q.values()) + 1e-12);
    }
}

TEST_CASE("weighted barycenter basics") {
    const DensityGrid d = density_on(0.0, 1.0, 201, [](double) { return 1.0; });
    const QuantileCurve uniform = quantile_from_density(d, 101);

    SUBCASE("single curve with weight 1 comes back unchanged") {
        const double w[1] = {1.0};
        const QuantileCurve out =
            weighted_quantile_barycenter(std::span<const QuantileCurve>(&uniform, 1),
                                         std::span<const double>(w, 1));
        for (std::size_t j = 0; j < out.points(); ++j)
            CHECK(out.value(j) == doctest::Approx(uniform.value(j)).epsilon(1e-12));
    }

    SUBCASE("two shifted uniforms average to the midpoint shift") {
        std::vector<double> v2(uniform.values());
        for (double& v : v2) v += 1.0;
        const QuantileCurve q2(v2, 0.0, 2.0);
        const std::vector<QuantileCurve> curves{uniform, q2};
        const std::vector<double> w{1.0, 1.0};
        const QuantileCurve out = weighted_quantile_barycenter(curves, w);
        for (std::size_t j = 0; j < out.points(); ++j) {
            const double t = static_cast<double>(j) / (out.points() - 1);
            CHECK(out.value(j) == doctest::Approx(t + 0.5).epsilon(1e-9));
        }
    }

    SUBCASE("weights concentrated on one curve return that curve") {
        Rng rng(3);
        std::vector<QuantileCurve> curves;
        for (int i = 0; i < 4; ++i) curves.push_back(random_monotone_curve(rng, 101, 0.0, 1.0));
        const std::vector<double> w{0.0, 0.0, 4.0, 0.0};
        const QuantileCurve out = weighted_quantile_barycenter(curves, w);
        for (std::size_t j = 0; j < out.points(); ++j)
            CHECK(out.value(j) == doctest::Approx(curves[2].value(j)).epsilon(1e-12));
    }

    SUBCASE("all-positive weights need no projection") {
        Rng rng(11);
        std::vector<QuantileCurve> curves;
        for (int i = 0; i < 5; ++i) curves.push_back(random_monotone_curve(rng, 61, 0.0, 1.0));
        const std::vector<double> w{0.5, 1.5, 0.75, 1.25, 1.0};
        const QuantileCurve out = weighted_quantile_barycenter(curves, w);
        for (std::size_t j = 0; j < out.points(); ++j) {
            double avg = 0.0;
            for (int i = 0; i < 5; ++i) avg += w[i] / 5.0 * curves[i].value(j);
            CHECK(out.value(j) == doctest::Approx(avg).epsilon(1e-12));
        }
    }

    SUBCASE("weight-sum violation and empty input are rejected") {
        const std::vector<QuantileCurve> curves{uniform};
        const std::vector<double> bad{1.5};
        CHECK_THROWS_AS(weighted_quantile_barycenter(curves, bad), std::invalid_argument);
        CHECK_THROWS_AS(weighted_quantile_barycenter(std::span<const QuantileCurve>{},
                                                     std::span<const double>{}),
                        std::invalid_argument);
    }
}

TEST_CASE("barycenter output is identical under permutation of the pairs") {
    Rng rng(41);
    std::vector<QuantileCurve> curves;
    for (int i = 0; i < 6; ++i) curves.push_back(random_monotone_curve(rng, 51, 0.0, 1.0));
    std::vector<double> w{2.0, -0.5, 1.2, 0.8, 1.6, 0.9};
    const QuantileCurve ref = weighted_quantile_barycenter(curves, w);

    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<QuantileCurve> curves_p;
    std::vector<double> w_p;
    for (std::size_t i : perm) {
        curves_p.push_back(curves[i]);
        w_p.push_back(w[i]);
    }
    const QuantileCurve out = weighted_quantile_barycenter(curves_p, w_p);
    CHECK(out == ref); // bit-identical
}

TEST_CASE("discrete 1-D distance agrees with the quantile metric") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 2);
    const DiscreteMeasure a(spec, {1.0, 0.0});
    const DiscreteMeasure b(spec, {0.0, 1.0});
    CHECK(w2_1d_discrete(a, b) == doctest::Approx(1.0));
    CHECK(w2_1d_discrete(a, a) == doctest::Approx(0.0));

    Rng rng(29);
    GridSpec fine = GridSpec::uniform1d(0.0, 1.0, 101);
    std::vector<double> wa(fine.size()), wb(fine.size());
    for (double& v : wa) v = rng.uniform(0.0, 1.0);
    for (double& v : wb) v = rng.uniform(0.0, 1.0);
    const DiscreteMeasure ma = DiscreteMeasure::normalized(fine, wa);
    const DiscreteMeasure mb = DiscreteMeasure::normalized(fine, wb);
    const double exact = w2_1d_discrete(ma, mb);
    const double sampled =
        w2_1d(quantile_from_measure(ma, 40001), quantile_from_measure(mb, 40001));
    CHECK(sampled == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("measure_from_quantile stays W2-close to the curve") {
    const DensityGrid d = density_on(0.0, 1.0, 401, [](double w) {
        return std::exp(-0.5 * (w - 0.45) * (w - 0.45) / 0.015);
    });
    const QuantileCurve q = quantile_from_density(d, 801);
    GridSpec grid = GridSpec::uniform1d(0.0, 1.0, 101);
    const DiscreteMeasure m = measure_from_quantile(q, grid);
    CHECK(w2_1d(q, quantile_from_measure(m, 801)) <= 1e-4);
}

} // TEST_SUITE
