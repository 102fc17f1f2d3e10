#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wassreg/errors.hpp"
#include "wassreg/regression.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;

namespace {

DensityGrid bump(double center, double sd, const GridSpec& spec) {
    std::vector<double> values(spec.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double z = (spec.coordinate(0, static_cast<int>(k)) - center) / sd;
        values[k] = std::exp(-0.5 * z * z);
    }
    return DensityGrid::normalized(spec, std::move(values));
}

DiscreteMeasure gaussian_2d(const GridSpec& spec, double mx, double my, double sd) {
    std::vector<double> values(spec.size());
    int idx[2];
    for (std::size_t k = 0; k < values.size(); ++k) {
        spec.axis_indices(k, idx);
        const double zx = (spec.coordinate(0, idx[0]) - mx) / sd;
        const double zy = (spec.coordinate(1, idx[1]) - my) / sd;
        values[k] = std::exp(-0.5 * (zx * zx + zy * zy));
    }
    return discretize(DensityGrid::normalized(spec, std::move(values)));
}

//! Shift family: base quantile curve moved by c * t.
std::vector<QuantileCurve> shift_family(const QuantileCurve& base, std::span<const double> ts,
                                        double c) {
    std::vector<QuantileCurve> out;
    for (double t : ts) {
        std::vector<double> v(base.values());
        for (double& q : v) q += c * t;
        out.emplace_back(std::move(v), base.support_lo() - std::abs(c), base.support_hi() + std::abs(c));
    }
    return out;
}

} // namespace

TEST_SUITE("regression") {

TEST_CASE("identical responses predict themselves everywhere") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 101);
    const QuantileCurve q = quantile_from_density(bump(0.5, 0.1, spec), 201);
    const std::vector<double> x{0.1, 0.4, 0.9, 0.6};
    const std::vector<QuantileCurve> responses(4, q);
    const FittedModel model =
        FittedModel::exact1d(PredictorSample::from_scalar(x), responses, FitMode::global);

    for (double query : {0.0, 0.5, 1.3, -0.2}) {
        const QuantileCurve out = std::get<QuantileCurve>(model.predict(query));
        const double err = w2_1d(out, q);
        CHECK(err <= 1e-20);
    }
}

TEST_CASE("identical responses through the entropic solver") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 41);
    const DiscreteMeasure r = discretize(bump(0.5, 0.12, spec));
    const std::vector<double> x{0.2, 0.5, 0.8};
    SinkhornSettings s;
    s.lambda = 1.0;
    const FittedModel model = FittedModel::sinkhorn(PredictorSample::from_scalar(x),
                                                    {r, r, r}, FitMode::global, s);
    const DiscreteMeasure out = std::get<DiscreteMeasure>(model.predict(0.5));
    double l1 = 0.0;
    for (std::size_t k = 0; k < r.mass().size(); ++k) l1 += std::abs(out.mass()[k] - r.mass()[k]);
    CHECK(l1 < 0.05); // entropic blur only
}

TEST_CASE("global model recovers a shift geodesic, inside and outside") {
    GridSpec spec = GridSpec::uniform1d(0.0, 3.0, 301);
    const double step = spec.step(0);
    const QuantileCurve base = quantile_from_density(bump(0.8, 0.15, spec), 201);
    const double c = 1.0;

    std::vector<double> ts;
    for (int i = 0; i < 12; ++i) ts.push_back(i / 11.0);
    const std::vector<QuantileCurve> responses = shift_family(base, ts, c);
    const FittedModel model =
        FittedModel::exact1d(PredictorSample::from_scalar(ts), responses, FitMode::global);

    for (double x : {0.15, 0.5, 0.85}) {
        const QuantileCurve truth = shift_family(base, {&x, 1}, c)[0];
        const double w2 = std::sqrt(w2_1d(std::get<QuantileCurve>(model.predict(x)), truth));
        CHECK(w2 <= 2.0 * step);
    }
    for (double x : {-0.5, 1.5}) {
        const QuantileCurve truth = shift_family(base, {&x, 1}, c)[0];
        const double w2 = std::sqrt(w2_1d(std::get<QuantileCurve>(model.predict(x)), truth));
        CHECK(w2 <= 4.0 * step);
    }
}

TEST_CASE("exact and entropic solvers agree on one-dimensional data") {
    Rng rng(19);
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 101);
    const int n = 6;
    std::vector<double> x(n);
    std::vector<QuantileCurve> curves;
    std::vector<DiscreteMeasure> measures;
    for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        const DensityGrid d = bump(rng.uniform(0.3, 0.7), rng.uniform(0.05, 0.12), spec);
        curves.push_back(quantile_from_density(d, 801));
        measures.push_back(discretize(d));
    }
    const PredictorSample ps = PredictorSample::from_scalar(x);
    const FittedModel exact = FittedModel::exact1d(ps, curves, FitMode::global);
    SinkhornSettings s;
    s.lambda = 1.0;
    const FittedModel entropic = FittedModel::sinkhorn(ps, measures, FitMode::global, s);

    for (double query : {0.25, 0.5, 0.75}) {
        const QuantileCurve qe = std::get<QuantileCurve>(exact.predict(query));
        const DiscreteMeasure ms = std::get<DiscreteMeasure>(entropic.predict(query));
        const double w2 = std::sqrt(w2_1d(qe, quantile_from_measure(ms, 801)));
        CHECK(w2 <= 0.05);
    }
}

TEST_CASE("predict is invariant under permuting the observation pairs") {
    Rng rng(4);
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 61);
    const int n = 7;
    std::vector<double> x(n);
    std::vector<QuantileCurve> curves;
    for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        curves.push_back(quantile_from_density(bump(rng.uniform(0.3, 0.7), 0.08, spec), 101));
    }
    const FittedModel ref =
        FittedModel::exact1d(PredictorSample::from_scalar(x), curves, FitMode::global);
    const QuantileCurve out_ref = std::get<QuantileCurve>(ref.predict(1.4));

    const std::vector<int> perm{5, 1, 6, 0, 3, 2, 4};
    std::vector<double> xp;
    std::vector<QuantileCurve> cp;
    for (int i : perm) {
        xp.push_back(x[i]);
        cp.push_back(curves[i]);
    }
    const FittedModel permuted =
        FittedModel::exact1d(PredictorSample::from_scalar(xp), cp, FitMode::global);
    const QuantileCurve out_perm = std::get<QuantileCurve>(permuted.predict(1.4));
    CHECK(out_perm == out_ref); // bit-identical
}

TEST_CASE("local mode refuses extrapolation requests") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 51);
    std::vector<double> x{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<QuantileCurve> curves(5, quantile_from_density(bump(0.5, 0.1, spec), 101));
    const FittedModel model =
        FittedModel::exact1d(PredictorSample::from_scalar(x), curves, FitMode::local,
                             KernelSpec(KernelFamily::gaussian, {0.1}));
    CHECK_THROWS_AS(model.predict(2.0), ExtrapolationNotSupported);
    CHECK_THROWS_AS(model.predict(-0.6), ExtrapolationNotSupported);
    CHECK_NOTHROW(model.predict(0.5));
}

TEST_CASE("predict_path preserves order and reports the failing index") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 51);
    std::vector<double> x{0.1, 0.5, 0.9};
    std::vector<QuantileCurve> curves(3, quantile_from_density(bump(0.4, 0.1, spec), 101));
    const FittedModel model =
        FittedModel::exact1d(PredictorSample::from_scalar(x), curves, FitMode::local,
                             KernelSpec(KernelFamily::gaussian, {0.2}));

    const std::vector<std::vector<double>> same{{0.5}, {0.5}};
    const std::vector<Prediction> out = predict_path(model, same);
    REQUIRE(out.size() == 2);
    CHECK(std::get<QuantileCurve>(out[0]) == std::get<QuantileCurve>(out[1]));

    CHECK(predict_path(model, std::span<const std::vector<double>>{}).empty());

    const std::vector<std::vector<double>> bad{{0.5}, {4.0}, {0.6}};
    try {
        predict_path(model, bad);
        FAIL("expected failure at element 1");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("element 1") != std::string::npos);
    }
}

TEST_CASE("two-point global prediction follows the displacement interpolation") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 41);
    const DensityGrid d0 = bump(0.3, 0.05, spec);
    const DensityGrid d1 = bump(0.65, 0.09, spec);
    const PredictorSample ps = PredictorSample::from_scalar({0.0, 1.0});
    const FittedModel model =
        FittedModel::exact1d(ps, {quantile_from_density(d0, 801), quantile_from_density(d1, 801)},
                             FitMode::global);
    const DiscreteMeasure m0 = discretize(d0), m1 = discretize(d1);
    for (double t : {0.25, 0.5, 0.75}) {
        const QuantileCurve pred = std::get<QuantileCurve>(model.predict(t));
        const DiscreteMeasure mc = mccann_interpolate(m0, m1, t);
        const double w2 = std::sqrt(w2_1d(pred, quantile_from_measure(mc, 801)));
        CHECK(w2 <= 2.0 * spec.step(0));
    }
}

TEST_CASE("mccann endpoints reproduce the inputs exactly in LP mode") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 33);
    const DiscreteMeasure m0 = discretize(bump(0.3, 0.04, spec));
    const DiscreteMeasure m1 = discretize(bump(0.7, 0.06, spec));
    const DiscreteMeasure at0 = mccann_interpolate(m0, m1, 0.0);
    const DiscreteMeasure at1 = mccann_interpolate(m0, m1, 1.0);
    for (std::size_t k = 0; k < m0.mass().size(); ++k) {
        CHECK(at0.mass()[k] == doctest::Approx(m0.mass()[k]).epsilon(1e-12));
        CHECK(at1.mass()[k] == doctest::Approx(m1.mass()[k]).epsilon(1e-12));
    }
}

TEST_CASE("mccann midpoint of two point masses sits at the middle node") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 101);
    std::vector<double> wa(spec.size(), 0.0), wb(spec.size(), 0.0);
    wa[20] = 1.0; // 0.20
    wb[80] = 1.0; // 0.80
    const DiscreteMeasure a(spec, wa), b(spec, wb);
    const DiscreteMeasure mid = mccann_interpolate(a, b, 0.5);
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < mid.mass().size(); ++k)
        if (mid.mass()[k] > mid.mass()[argmax]) argmax = k;
    CHECK(argmax == 50);
    CHECK(mid.mass()[50] == doctest::Approx(1.0));
}

TEST_CASE("mccann between 2-D Gaussians lands its mean on the segment") {
    GridSpec spec = GridSpec::square2d(0.0, 10.0, 41);
    const DiscreteMeasure a = gaussian_2d(spec, 4.0, 4.0, 1.0);
    const DiscreteMeasure b = gaussian_2d(spec, 6.0, 6.0, 1.1);
    SinkhornSettings s;
    s.lambda = 0.5;
    const DiscreteMeasure mid = mccann_interpolate(a, b, 0.5, s); // support > LP cap
    const std::vector<double> mean = mid.mean();
    CHECK(std::abs(mean[0] - 5.0) <= spec.step(0));
    CHECK(std::abs(mean[1] - 5.0) <= spec.step(1));
}

TEST_CASE("mccann refuses to push mass out of the rectangle") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 51);
    std::vector<double> wa(spec.size(), 0.0), wb(spec.size(), 0.0);
    wa[10] = 1.0; // 0.2
    wb[40] = 1.0; // 0.8
    const DiscreteMeasure a(spec, wa), b(spec, wb);
    CHECK_THROWS_AS(mccann_interpolate(a, b, 1.5), DomainExit);
    CHECK_NOTHROW(mccann_interpolate(a, b, 1.3)); // 0.2 + 1.3 * 0.6 = 0.98, still inside
}

TEST_CASE("geodesic_check: location families move at constant speed") {
    GridSpec spec = GridSpec::uniform1d(0.0, 3.0, 301);
    const QuantileCurve base = quantile_from_density(bump(0.6, 0.1, spec), 401);
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<QuantileCurve> path = shift_family(base, ts, 1.2);
    CHECK(geodesic_check(path, ts) < 1e-3);
}

TEST_CASE("geodesic_check flags a degenerate (constant) path") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 21);
    const DiscreteMeasure r = discretize(bump(0.5, 0.1, spec));
    const std::vector<DiscreteMeasure> path{r, r, r};
    const std::vector<double> ts{0.0, 0.5, 1.0};
    CHECK_THROWS_AS(geodesic_check(path, ts, PathMetric::exact), std::invalid_argument);
}

TEST_CASE("mccann interpolants form a near-constant-speed path") {
    GridSpec spec = GridSpec::uniform1d(0.0, 1.0, 41);
    const DiscreteMeasure a = discretize(bump(0.25, 0.05, spec));
    const DiscreteMeasure b = discretize(bump(0.7, 0.08, spec));
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<DiscreteMeasure> path;
    for (double t : ts) path.push_back(mccann_interpolate(a, b, t));
    CHECK(geodesic_check(path, ts, PathMetric::exact) < 0.05);
}

} // TEST_SUITE
