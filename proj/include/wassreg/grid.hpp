#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace wassreg {

//! Equidistant rectangular evaluation grid on a product of intervals.
//!
//! Flat indices are row-major with axis 0 slowest, so that in 2-D the
//! flat index is i0 * count(1) + i1. All measures, densities and plans in
//! this library live on such a grid.
class GridSpec {
public:
    GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<int> counts);

    static GridSpec uniform1d(double lo, double hi, int count);
    static GridSpec square2d(double lo, double hi, int count_per_axis);

    int dim() const { return static_cast<int>(counts_.size()); }
    std::size_t size() const { return total_; }
    double lower(int axis) const { return lower_[axis]; }
    double upper(int axis) const { return upper_[axis]; }
    int count(int axis) const { return counts_[axis]; }
    double step(int axis) const { return steps_[axis]; }

    //! Volume of one grid cell (product of per-axis steps).
    double cell_volume() const;
    //! Length of the diagonal of one grid cell.
    double bin_diagonal() const;

    double coordinate(int axis, int index) const { return lower_[axis] + steps_[axis] * index; }

    void axis_indices(std::size_t flat, int* out) const;
    std::size_t flat_index(const int* indices) const;
    std::vector<double> point(std::size_t flat) const;

    //! Squared Euclidean distance between grid points k and l.
    double squared_distance(std::size_t k, std::size_t l) const;

    bool operator==(const GridSpec& other) const;
    bool operator!=(const GridSpec& other) const { return !(*this == other); }

private:
    std::vector<double> lower_, upper_, steps_;
    std::vector<int> counts_;
    std::size_t total_ = 0;
};

//! Nonnegative density values on a GridSpec, in probability per unit volume.
//! The Riemann sum (value x cell volume) is required to be within 2% of 1
//! at construction; normalize() rescales it to 1 exactly.
class DensityGrid {
public:
    DensityGrid(GridSpec spec, std::vector<double> values);

    //! Builds a density from arbitrary nonnegative values by rescaling them
    //! so the Riemann sum is 1.
    static DensityGrid normalized(GridSpec spec, std::vector<double> values);

    const GridSpec& spec() const { return spec_; }
    const std::vector<double>& values() const { return values_; }
    double value(std::size_t flat) const { return values_[flat]; }

    double riemann_sum() const;
    void normalize();

private:
    DensityGrid() = default;
    GridSpec spec_{{0.0}, {1.0}, {2}};
    std::vector<double> values_;
};

//! Probability mass vector supported on the points of a GridSpec.
class DiscreteMeasure {
public:
    //! Requires nonnegative mass of length spec.size() summing to 1 within
    //! 1e-8; the residue is absorbed so the sum is exactly 1.
    DiscreteMeasure(GridSpec spec, std::vector<double> mass);

    //! Builds a measure from arbitrary nonnegative weights with positive sum.
    static DiscreteMeasure normalized(GridSpec spec, std::vector<double> weights);

    const GridSpec& spec() const { return spec_; }
    const std::vector<double>& mass() const { return mass_; }
    double mass_at(std::size_t flat) const { return mass_[flat]; }
    std::size_t support_size() const;

    //! Mean of the measure, one value per axis.
    std::vector<double> mean() const;

private:
    DiscreteMeasure() = default;
    GridSpec spec_{{0.0}, {1.0}, {2}};
    std::vector<double> mass_;
};

//! Dense m x m matrix of squared Euclidean distances between grid points.
class CostMatrix {
public:
    CostMatrix(std::size_t m, std::vector<double> entries);

    std::size_t size() const { return m_; }
    double operator()(std::size_t k, std::size_t l) const { return entries_[k * m_ + l]; }
    const std::vector<double>& entries() const { return entries_; }
    double max_entry() const;

private:
    std::size_t m_;
    std::vector<double> entries_;
};

//! One entry of a sparse transport plan.
struct PlanAtom {
    std::size_t from, to;
    double mass;
};

//! Joint mass matrix with prescribed marginals. Stored densely, as a sparse
//! atom list (exact LP solutions), or in Sinkhorn scaling form
//! S = diag(u) K diag(v) with a separable Gibbs kernel, in which case rows
//! are streamed on demand and the full matrix is never materialized.
class TransportPlan {
public:
    static TransportPlan from_dense(GridSpec spec, std::vector<double> entries,
                                    std::vector<double> source, std::vector<double> target);

    static TransportPlan from_atoms(GridSpec spec, std::vector<PlanAtom> atoms,
                                    std::vector<double> source, std::vector<double> target);

    //! Scaling-form plan; axis_lambda holds the per-axis Gibbs coefficient
    //! so that S_kl = u_k * exp(-sum_ax axis_lambda[ax] * delta_ax^2) * v_l.
    static TransportPlan from_scaling(GridSpec spec, std::vector<double> u, std::vector<double> v,
                                      std::vector<double> axis_lambda,
                                      std::vector<double> source, std::vector<double> target,
                                      std::vector<double> row_marginal, std::vector<double> col_marginal);

    const GridSpec& spec() const { return spec_; }
    std::size_t size() const { return spec_.size(); }
    bool is_dense() const { return storage_ == Storage::dense; }
    bool is_sparse() const { return storage_ == Storage::atoms; }

    const std::vector<double>& source() const { return source_; }
    const std::vector<double>& target() const { return target_; }
    std::vector<double> row_marginal() const;
    std::vector<double> col_marginal() const;

    //! Sup-norm violation of the marginal constraints against source/target.
    double max_marginal_violation() const;

    //! Transport cost <S, D> with squared Euclidean ground cost.
    double cost() const;

    //! Calls fn(k, l, mass) for every atom with mass > 0, row by row.
    void for_each_atom(const std::function<void(std::size_t, std::size_t, double)>& fn) const;

    double entry(std::size_t k, std::size_t l) const;

private:
    enum class Storage { dense, atoms, scaling };

    explicit TransportPlan(GridSpec spec) : spec_(std::move(spec)) {}

    GridSpec spec_;
    Storage storage_ = Storage::dense;
    std::vector<double> entries_;             // dense mode
    std::vector<PlanAtom> atoms_;             // sparse mode
    std::vector<double> u_, v_, axis_lambda_; // scaling mode
    std::vector<double> source_, target_;
    std::vector<double> row_marginal_, col_marginal_; // cached in scaling mode

    double kernel_value(std::size_t k, std::size_t l) const;
};

//! Normalizes density values into a probability mass vector on the grid.
//! Throws std::invalid_argument("degenerate density") when all values are 0.
DiscreteMeasure discretize(const DensityGrid& density);

//! Pairwise squared-distance matrix of the grid. Refuses grids with more
//! than 4096 points; large grids are served by the separable kernel path.
CostMatrix cost_matrix(const GridSpec& spec);

} // namespace wassreg
