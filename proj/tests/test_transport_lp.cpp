#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wassreg/grid.hpp"
#include "wassreg/quantile.hpp"
#include "wassreg/rng.hpp"
#include "wassreg/transport_lp.hpp"

using namespace wassreg;

TEST_SUITE("transport_lp") {

TEST_CASE("point mass to point mass at distance 1 costs 1") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 2);
    const DiscreteMeasure a(spec, {1.0, 0.0});
    const DiscreteMeasure b(spec, {0.0, 1.0});
    CHECK(exact_w2_discrete(a, b) == doctest::Approx(1.0));
    CHECK(exact_w2_discrete(a, b, cost_matrix(spec)) == doctest::Approx(1.0));
}

TEST_CASE("identical measures cost 0 through the identity plan") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 2);
    const DiscreteMeasure a(spec, {0.5, 0.5});
    const ExactTransport r = exact_transport(a, a);
    CHECK(r.cost == doctest::Approx(0.0));
    CHECK(r.plan.max_marginal_violation() <= 1e-12);
}

TEST_CASE("equal cross costs: optimum equals the common cost, plan not unique") {
    // Two two-point measures where every source-target pair costs the same,
    // as happens for measures on opposite edges of a regular tetrahedron.
    GridSpec spec = GridSpec::uniform1d(0.0, 3.0, 4);
    const DiscreteMeasure a(spec, {0.5, 0.5, 0.0, 0.0});
    const DiscreteMeasure b(spec, {0.0, 0.0, 0.5, 0.5});
    const double c = 3.0;
    std::vector<double> d(16, c);
    for (int i = 0; i < 4; ++i) d[i * 4 + i] = 0.0;
    const CostMatrix cost(4, std::move(d));
    CHECK(exact_w2_discrete(a, b, cost) == doctest::Approx(c));
}

TEST_CASE("1-D instances match the monotone-coupling oracle") {
    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 8 + static_cast<int>(rng.uniform(0.0, 1.0) * 40);
        GridSpec spec = GridSpec::uniform1d(0.0, 1.0, m);
        std::vector<double> wa(m, 0.0), wb(m, 0.0);
        // Sparse random supports so degenerate pivots occur too.
        for (int k = 0; k < m; ++k) {
            if (rng.uniform() < 0.6) wa[k] = rng.uniform(0.0, 1.0);
            if (rng.uniform() < 0.6) wb[k] = rng.uniform(0.0, 1.0);
        }
        wa[0] += 0.1;
        wb[m - 1] += 0.1;
        const DiscreteMeasure a = DiscreteMeasure::normalized(spec, wa);
        const DiscreteMeasure b = DiscreteMeasure::normalized(spec, wb);

        const ExactTransport r = exact_transport(a, b);
        CHECK(r.cost == doctest::Approx(w2_1d_discrete(a, b)).epsilon(1e-10));
        CHECK(r.plan.max_marginal_violation() <= 1e-9);
    }
}

TEST_CASE("LP cost never exceeds the independent-coupling cost") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        GridSpec spec = GridSpec::square2d(0.0, 1.0, 5);
        std::vector<double> wa(spec.size(), 0.0), wb(spec.size(), 0.0);
        for (int k = 0; k < 20; ++k) {
            wa[static_cast<std::size_t>(rng.uniform() * spec.size())] += rng.uniform(0.1, 1.0);
            wb[static_cast<std::size_t>(rng.uniform() * spec.size())] += rng.uniform(0.1, 1.0);
        }
        const DiscreteMeasure a = DiscreteMeasure::normalized(spec, wa);
        const DiscreteMeasure b = DiscreteMeasure::normalized(spec, wb);
        const double lp = exact_w2_discrete(a, b);
        double independent = 0.0;
        for (std::size_t k = 0; k < spec.size(); ++k)
            for (std::size_t l = 0; l < spec.size(); ++l)
                independent += a.mass()[k] * b.mass()[l] * spec.squared_distance(k, l);
        CHECK(lp <= independent + 1e-12);
        CHECK(lp >= 0.0);
    }
}

TEST_CASE("2-D displacement of a point pair") {
    GridSpec spec = GridSpec::square2d(0.0, 1.0, 11);
    std::vector<double> wa(spec.size(), 0.0), wb(spec.size(), 0.0);
    int ia[2] = {2, 3}, ib[2] = {7, 9};
    wa[spec.flat_index(ia)] = 1.0;
    wb[spec.flat_index(ib)] = 1.0;
    const DiscreteMeasure a(spec, wa), b(spec, wb);
    const double dx = 0.5, dy = 0.6;
    CHECK(exact_w2_discrete(a, b) == doctest::Approx(dx * dx + dy * dy));
}

TEST_CASE("support cap is enforced") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 128);
    std::vector<double> w(spec.size(), 1.0);
    const DiscreteMeasure a = DiscreteMeasure::normalized(spec, w); // support 128 > 64
    CHECK_THROWS_AS(exact_w2_discrete(a, a), std::invalid_argument);
}

} // TEST_SUITE
