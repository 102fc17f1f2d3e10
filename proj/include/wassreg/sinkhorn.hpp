#pragma once

#include <memory>
#include <span>
#include <vector>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Knobs of the entropy-regularized solver. lambda is the coefficient of
//! the cost term relative to the entropy penalty: larger lambda means a
//! sharper plan and slower convergence. The stable band in practice is
//! [1/4, 1]; the default is 2/5.
struct SinkhornSettings {
    double lambda = 0.4;
    int max_iters = 10000;
    double tolerance = 1e-6; //!< marginal violation sup-norm / iterate L1 change
    bool log_domain = false; //!< start directly in the log domain
    bool allow_log_fallback = true; //!< switch to log domain when scalings underflow

    void validate() const;
};

struct SinkhornResult {
    TransportPlan plan;
    double divergence; //!< transport cost <S, D> of the regularized plan
    int iterations;
    double marginal_violation;
};

//! Gibbs kernel interface used by the scaling iterations. Implementations
//! provide K x, (K o D) x for cost evaluation, and a log-sum-exp variant
//! for the log domain. Kernels are stateless; callers pass scratch space.
class GibbsKernel {
public:
    virtual ~GibbsKernel() = default;

    virtual std::size_t size() const = 0;
    virtual std::size_t scratch_size() const = 0;

    virtual void apply(const double* x, double* y, double* scratch) const = 0;
    virtual void apply_cost(const double* x, double* y, double* scratch) const = 0;
    virtual void apply_log(const double* log_x, double* log_y, double* scratch) const = 0;

    //! log K_kl and the ground cost D_kl for entrywise evaluation.
    virtual double log_kernel(std::size_t k, std::size_t l) const = 0;
    virtual double ground_cost(std::size_t k, std::size_t l) const = 0;
};

//! Kernel exp(-sum_ax axis_lambda[ax] * delta_ax^2) on a product grid,
//! applied one axis at a time; cost O(m * sum_ax count(ax)) instead of m^2.
std::unique_ptr<GibbsKernel> make_separable_kernel(const GridSpec& spec,
                                                   std::span<const double> axis_lambda);

//! Dense kernel exp(-lambda * D) for an arbitrary cost matrix.
std::unique_ptr<GibbsKernel> make_dense_kernel(const CostMatrix& cost, double lambda);

//! Entropy-regularized transport plan between measures on a shared grid
//! with squared Euclidean cost; the divergence reported is the transport
//! cost <S, D> of the regularized plan (the entropy term is not included).
SinkhornResult sinkhorn_plan(const DiscreteMeasure& source, const DiscreteMeasure& target,
                             const SinkhornSettings& settings);

//! Same with an explicit cost matrix (dense kernel).
SinkhornResult sinkhorn_plan(const DiscreteMeasure& source, const DiscreteMeasure& target,
                             const CostMatrix& cost, const SinkhornSettings& settings);

//! Entropic divergence only (no plan materialization); usable on grids too
//! large for a stored plan.
double sinkhorn_divergence(const DiscreteMeasure& source, const DiscreteMeasure& target,
                           const SinkhornSettings& settings);

//! Iterative weighted-barycenter solver: alternating dual scaling updates
//! per measure with a geometric-mean consolidation step carried out in the
//! log domain, where negative weights enter with their sign. The Gibbs
//! kernel measures distances in grid steps, so the entropic blur is a
//! fixed number of cells rather than a fixed coordinate length.
//!
//! The solver keeps its scaling state between solve() calls; a second call
//! with nearby weights warm-starts and converges in a few sweeps.
class SinkhornBarycenterSolver {
public:
    SinkhornBarycenterSolver(std::vector<DiscreteMeasure> measures, SinkhornSettings settings);
    ~SinkhornBarycenterSolver();

    SinkhornBarycenterSolver(const SinkhornBarycenterSolver&) = delete;
    SinkhornBarycenterSolver& operator=(const SinkhornBarycenterSolver&) = delete;

    //! Weights must satisfy (1/n) sum w_i = 1 within 1e-8 with at least one
    //! positive entry. Inputs are consolidated in a content-canonical order
    //! so permuting (measure, weight) pairs gives bit-identical output.
    DiscreteMeasure solve(std::span<const double> weights);

    //! Drops warm-start state.
    void reset();

    int last_iterations() const { return last_iterations_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int last_iterations_ = 0;
};

//! One-shot barycenter with weights averaging to 1 (possibly negative).
DiscreteMeasure weighted_sinkhorn_barycenter(std::span<const DiscreteMeasure> measures,
                                             std::span<const double> weights,
                                             const SinkhornSettings& settings);

} // namespace wassreg
