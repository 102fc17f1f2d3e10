#pragma once

#include <cstddef>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Largest per-side support the exact LP solver accepts. The solver is an
//! oracle for small instances; larger problems go through Sinkhorn.
inline constexpr std::size_t kExactTransportSupportCap = 64;

struct ExactTransport {
    TransportPlan plan;
    double cost;
    int pivots;
};

//! Exact optimal transport between two measures on a shared grid with
//! squared Euclidean ground cost, solved by the transportation simplex on
//! the positive-mass supports. Throws std::invalid_argument when either
//! support exceeds kExactTransportSupportCap.
ExactTransport exact_transport(const DiscreteMeasure& source, const DiscreteMeasure& target);

//! Same solver with an explicit cost matrix over the full grid.
ExactTransport exact_transport(const DiscreteMeasure& source, const DiscreteMeasure& target,
                               const CostMatrix& cost);

//! Exact squared 2-Wasserstein distance (the LP optimum).
double exact_w2_discrete(const DiscreteMeasure& source, const DiscreteMeasure& target,
                         const CostMatrix& cost);

double exact_w2_discrete(const DiscreteMeasure& source, const DiscreteMeasure& target);

} // namespace wassreg
