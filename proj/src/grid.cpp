#include "wassreg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

GridSpec::GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<int> counts)
    : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)) {
    require(!counts_.empty(), "grid: dimension must be positive");
    require(lower_.size() == counts_.size() && upper_.size() == counts_.size(),
            "grid: lower/upper/counts sizes differ");
    total_ = 1;
    steps_.resize(counts_.size());
    for (std::size_t a = 0; a < counts_.size(); ++a) {
        require(counts_[a] >= 2, "grid: per-axis count must be >= 2");
        require(lower_[a] < upper_[a], "grid: lower must be < upper on every axis");
        require(std::isfinite(lower_[a]) && std::isfinite(upper_[a]), "grid: bounds must be finite");
        steps_[a] = (upper_[a] - lower_[a]) / (counts_[a] - 1);
        total_ *= static_cast<std::size_t>(counts_[a]);
    }
}

GridSpec GridSpec::uniform1d(double lo, double hi, int count) {
    return GridSpec({lo}, {hi}, {count});
}

GridSpec GridSpec::square2d(double lo, double hi, int count_per_axis) {
    return GridSpec({lo, lo}, {hi, hi}, {count_per_axis, count_per_axis});
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (double s : steps_) v *= s;
    return v;
}

double GridSpec::bin_diagonal() const {
    double s2 = 0.0;
    for (double s : steps_) s2 += s * s;
    return std::sqrt(s2);
}

void GridSpec::axis_indices(std::size_t flat, int* out) const {
    for (int a = dim() - 1; a >= 0; --a) {
        const std::size_t n = static_cast<std::size_t>(counts_[a]);
        out[a] = static_cast<int>(flat % n);
        flat /= n;
    }
}

std::size_t GridSpec::flat_index(const int* indices) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim(); ++a) {
        flat = flat * static_cast<std::size_t>(counts_[a]) + static_cast<std::size_t>(indices[a]);
    }
    return flat;
}

std::vector<double> GridSpec::point(std::size_t flat) const {
    std::vector<double> p(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        const std::size_t n = static_cast<std::size_t>(counts_[a]);
        p[a] = coordinate(a, static_cast<int>(flat % n));
        flat /= n;
    }
    return p;
}

double GridSpec::squared_distance(std::size_t k, std::size_t l) const {
    double d2 = 0.0;
    for (int a = dim() - 1; a >= 0; --a) {
        const std::size_t n = static_cast<std::size_t>(counts_[a]);
        const double d = (static_cast<double>(k % n) - static_cast<double>(l % n)) * steps_[a];
        d2 += d * d;
        k /= n;
        l /= n;
    }
    return d2;
}

bool GridSpec::operator==(const GridSpec& other) const {
    return lower_ == other.lower_ && upper_ == other.upper_ && counts_ == other.counts_;
}

DensityGrid::DensityGrid(GridSpec spec, std::vector<double> values) {
    require(values.size() == spec.size(), "density: value count must equal grid size");
    for (double v : values) {
        require(std::isfinite(v), "density: values must be finite");
        require(v >= 0.0, "density: values must be nonnegative");
    }
    spec_ = std::move(spec);
    values_ = std::move(values);
    const double s = riemann_sum();
    require(std::abs(s - 1.0) <= 0.02, "density: Riemann sum must be within 2% of 1");
}

DensityGrid DensityGrid::normalized(GridSpec spec, std::vector<double> values) {
    require(values.size() == spec.size(), "density: value count must equal grid size");
    double total = 0.0;
    for (double v : values) {
        require(std::isfinite(v) && v >= 0.0, "density: values must be finite and nonnegative");
        total += v;
    }
    require(total > 0.0, "degenerate density");
    const double scale = 1.0 / (total * spec.cell_volume());
    for (double& v : values) v *= scale;
    DensityGrid d;
    d.spec_ = std::move(spec);
    d.values_ = std::move(values);
    return d;
}

double DensityGrid::riemann_sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s * spec_.cell_volume();
}

void DensityGrid::normalize() {
    const double s = riemann_sum();
    require(s > 0.0, "degenerate density");
    for (double& v : values_) v /= s;
}

namespace {

//! Divides by the total and absorbs the floating-point residue into the
//! largest component so the recomputed sum is exactly 1. Idempotent: a
//! vector already summing to 1 passes through unchanged.
std::vector<double> to_simplex(std::vector<double> w) {
    double total = 0.0;
    for (double v : w) total += v;
    std::size_t largest = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::abs(total - 1.0) > 1e-12) w[i] /= total;
        if (w[i] > w[largest]) largest = i;
    }
    for (int pass = 0; pass < 5; ++pass) {
        double s = 0.0;
        for (double v : w) s += v;
        if (s == 1.0) break;
        w[largest] += 1.0 - s;
    }
    return w;
}

} // namespace

DiscreteMeasure::DiscreteMeasure(GridSpec spec, std::vector<double> mass) {
    require(mass.size() == spec.size(), "measure: mass length must equal grid size");
    double total = 0.0;
    for (double v : mass) {
        require(std::isfinite(v) && v >= 0.0, "measure: mass must be finite and nonnegative");
        total += v;
    }
    require(std::abs(total - 1.0) <= 1e-8, "measure: mass must sum to 1");
    spec_ = std::move(spec);
    mass_ = to_simplex(std::move(mass));
}

DiscreteMeasure DiscreteMeasure::normalized(GridSpec spec, std::vector<double> weights) {
    require(weights.size() == spec.size(), "measure: mass length must equal grid size");
    double total = 0.0;
    for (double v : weights) {
        require(std::isfinite(v) && v >= 0.0, "measure: mass must be finite and nonnegative");
        total += v;
    }
    require(total > 0.0, "measure: total mass must be positive");
    DiscreteMeasure m;
    m.spec_ = std::move(spec);
    m.mass_ = to_simplex(std::move(weights));
    return m;
}

std::size_t DiscreteMeasure::support_size() const {
    std::size_t n = 0;
    for (double v : mass_) n += (v > 0.0);
    return n;
}

std::vector<double> DiscreteMeasure::mean() const {
    std::vector<double> mu(spec_.dim(), 0.0);
    std::vector<int> idx(spec_.dim());
    for (std::size_t k = 0; k < mass_.size(); ++k) {
        if (mass_[k] == 0.0) continue;
        spec_.axis_indices(k, idx.data());
        for (int a = 0; a < spec_.dim(); ++a) mu[a] += mass_[k] * spec_.coordinate(a, idx[a]);
    }
    return mu;
}

CostMatrix::CostMatrix(std::size_t m, std::vector<double> entries) : m_(m), entries_(std::move(entries)) {
    require(entries_.size() == m_ * m_, "cost matrix: entry count must be m*m");
}

double CostMatrix::max_entry() const {
    double mx = 0.0;
    for (double v : entries_) mx = std::max(mx, v);
    return mx;
}

DiscreteMeasure discretize(const DensityGrid& density) {
    double total = 0.0;
    for (double v : density.values()) total += v;
    require(total > 0.0, "degenerate density");
    return DiscreteMeasure::normalized(density.spec(), density.values());
}

CostMatrix cost_matrix(const GridSpec& spec) {
    const std::size_t m = spec.size();
    require(m <= 4096, "cost matrix: grid too large to materialize densely");
    std::vector<double> entries(m * m);
    for (std::size_t k = 0; k < m; ++k) {
        entries[k * m + k] = 0.0;
        for (std::size_t l = k + 1; l < m; ++l) {
            const double d2 = spec.squared_distance(k, l);
            entries[k * m + l] = d2;
            entries[l * m + k] = d2;
        }
    }
    return CostMatrix(m, std::move(entries));
}

TransportPlan TransportPlan::from_dense(GridSpec spec, std::vector<double> entries,
                                        std::vector<double> source, std::vector<double> target) {
    const std::size_t m = spec.size();
    require(entries.size() == m * m, "plan: entry count must be m*m");
    require(source.size() == m && target.size() == m, "plan: marginal lengths must equal m");
    for (double v : entries) require(std::isfinite(v) && v >= -1e-15, "plan: entries must be nonnegative");
    TransportPlan p(std::move(spec));
    p.storage_ = Storage::dense;
    p.entries_ = std::move(entries);
    for (double& v : p.entries_) v = std::max(v, 0.0);
    p.source_ = std::move(source);
    p.target_ = std::move(target);
    return p;
}

TransportPlan TransportPlan::from_atoms(GridSpec spec, std::vector<PlanAtom> atoms,
                                        std::vector<double> source, std::vector<double> target) {
    const std::size_t m = spec.size();
    require(source.size() == m && target.size() == m, "plan: marginal lengths must equal m");
    for (const PlanAtom& a : atoms) {
        require(a.from < m && a.to < m, "plan: atom index out of range");
        require(std::isfinite(a.mass) && a.mass >= 0.0, "plan: atom mass must be nonnegative");
    }
    TransportPlan p(std::move(spec));
    p.storage_ = Storage::atoms;
    p.atoms_ = std::move(atoms);
    p.source_ = std::move(source);
    p.target_ = std::move(target);
    return p;
}

TransportPlan TransportPlan::from_scaling(GridSpec spec, std::vector<double> u, std::vector<double> v,
                                          std::vector<double> axis_lambda,
                                          std::vector<double> source, std::vector<double> target,
                                          std::vector<double> row_marginal, std::vector<double> col_marginal) {
    const std::size_t m = spec.size();
    require(u.size() == m && v.size() == m, "plan: scaling vector lengths must equal m");
    require(axis_lambda.size() == static_cast<std::size_t>(spec.dim()), "plan: one lambda per axis");
    TransportPlan p(std::move(spec));
    p.storage_ = Storage::scaling;
    p.u_ = std::move(u);
    p.v_ = std::move(v);
    p.axis_lambda_ = std::move(axis_lambda);
    p.source_ = std::move(source);
    p.target_ = std::move(target);
    p.row_marginal_ = std::move(row_marginal);
    p.col_marginal_ = std::move(col_marginal);
    return p;
}

double TransportPlan::kernel_value(std::size_t k, std::size_t l) const {
    double e = 0.0;
    for (int a = spec_.dim() - 1; a >= 0; --a) {
        const std::size_t n = static_cast<std::size_t>(spec_.count(a));
        const double d = (static_cast<double>(k % n) - static_cast<double>(l % n)) * spec_.step(a);
        e += axis_lambda_[a] * d * d;
        k /= n;
        l /= n;
    }
    return std::exp(-e);
}

std::vector<double> TransportPlan::row_marginal() const {
    if (storage_ == Storage::scaling) return row_marginal_;
    const std::size_t m = size();
    std::vector<double> r(m, 0.0);
    for_each_atom([&](std::size_t k, std::size_t, double mass) { r[k] += mass; });
    return r;
}

std::vector<double> TransportPlan::col_marginal() const {
    if (storage_ == Storage::scaling) return col_marginal_;
    const std::size_t m = size();
    std::vector<double> c(m, 0.0);
    for_each_atom([&](std::size_t, std::size_t l, double mass) { c[l] += mass; });
    return c;
}

double TransportPlan::max_marginal_violation() const {
    const std::vector<double> r = row_marginal();
    const std::vector<double> c = col_marginal();
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        worst = std::max(worst, std::abs(r[i] - source_[i]));
        worst = std::max(worst, std::abs(c[i] - target_[i]));
    }
    return worst;
}

double TransportPlan::cost() const {
    double total = 0.0;
    for_each_atom([&](std::size_t k, std::size_t l, double mass) {
        total += mass * spec_.squared_distance(k, l);
    });
    return total;
}

void TransportPlan::for_each_atom(const std::function<void(std::size_t, std::size_t, double)>& fn) const {
    const std::size_t m = size();
    switch (storage_) {
    case Storage::dense:
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t l = 0; l < m; ++l) {
                const double s = entries_[k * m + l];
                if (s > 0.0) fn(k, l, s);
            }
        return;
    case Storage::atoms:
        for (const PlanAtom& a : atoms_)
            if (a.mass > 0.0) fn(a.from, a.to, a.mass);
        return;
    case Storage::scaling:
        for (std::size_t k = 0; k < m; ++k) {
            if (u_[k] == 0.0) continue;
            for (std::size_t l = 0; l < m; ++l) {
                if (v_[l] == 0.0) continue;
                const double s = u_[k] * kernel_value(k, l) * v_[l];
                if (s > 0.0) fn(k, l, s);
            }
        }
        return;
    }
}

double TransportPlan::entry(std::size_t k, std::size_t l) const {
    switch (storage_) {
    case Storage::dense:
        return entries_[k * size() + l];
    case Storage::atoms: {
        double s = 0.0;
        for (const PlanAtom& a : atoms_)
            if (a.from == k && a.to == l) s += a.mass;
        return s;
    }
    case Storage::scaling:
    default:
        if (u_[k] == 0.0 || v_[l] == 0.0) return 0.0;
        return u_[k] * kernel_value(k, l) * v_[l];
    }
}

} // namespace wassreg
