#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Discretized inverse CDF: nondecreasing values on the uniform grid
//! t_j = j/(P-1), j = 0..P-1, with P >= 3, together with the support
//! interval the values must stay inside.
class QuantileCurve {
public:
    QuantileCurve(std::vector<double> values, double support_lo, double support_hi);

    std::size_t points() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    double value(std::size_t j) const { return values_[j]; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }

    //! Mean of the underlying distribution: trapezoid integral of Q over t.
    double mean() const;

    bool operator==(const QuantileCurve& other) const {
        return values_ == other.values_ && lo_ == other.lo_ && hi_ == other.hi_;
    }

private:
    std::vector<double> values_;
    double lo_, hi_;
};

//! Left-inverse of the trapezoid-rule CDF of a one-dimensional density,
//! evaluated on P uniform quantile levels. Flat CDF stretches map to their
//! left endpoint; Q(0) and Q(1) are the effective support edges.
QuantileCurve quantile_from_density(const DensityGrid& density, int quantile_points);

//! Left-inverse of the step CDF of a one-dimensional discrete measure.
QuantileCurve quantile_from_measure(const DiscreteMeasure& measure, int quantile_points);

//! Bins a quantile curve back onto a one-dimensional grid as a discrete
//! measure, splitting each of many equal-mass atoms linearly between the
//! two surrounding grid nodes.
DiscreteMeasure measure_from_quantile(const QuantileCurve& curve, const GridSpec& spec);

//! Squared 2-Wasserstein distance between two one-dimensional laws given by
//! their quantile curves: the trapezoid-rule integral of (Qa - Qb)^2 over t.
double w2_1d(const QuantileCurve& a, const QuantileCurve& b);

//! Exact squared 2-Wasserstein distance between one-dimensional discrete
//! measures via the monotone coupling. The grids may differ.
double w2_1d_discrete(const DiscreteMeasure& a, const DiscreteMeasure& b);

//! L2 projection onto nondecreasing sequences with uniform weights
//! (pool-adjacent-violators).
std::vector<double> isotonic_projection(std::vector<double> values);

//! Weighted quantile barycenter: pointwise average (1/n) sum_i w_i Q_i,
//! projected onto nondecreasing curves and clamped to the support interval.
//! Weights may be negative but must satisfy (1/n) sum_i w_i = 1 within 1e-8.
//! Inputs are processed in a content-canonical order so permuting the
//! (curve, weight) pairs gives a bit-identical result.
QuantileCurve weighted_quantile_barycenter(std::span<const QuantileCurve> curves,
                                           std::span<const double> weights);

} // namespace wassreg
