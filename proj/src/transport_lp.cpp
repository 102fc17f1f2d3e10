#include "wassreg/transport_lp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace wassreg {

namespace {

struct Cell {
    int i, j;
    double x;
};

//! Dense transportation simplex on supplies a (size ns) and demands b
//! (size nt) with cost(i, j). Dantzig entering rule with a Bland fallback
//! against degenerate cycling. Returns the basic cells of the optimum.
std::vector<Cell> transportation_simplex(const std::vector<double>& a, const std::vector<double>& b,
                                         const std::function<double(int, int)>& cost, int* pivots_out) {
    const int ns = static_cast<int>(a.size());
    const int nt = static_cast<int>(b.size());
    const int nodes = ns + nt;
    const int nbasic = ns + nt - 1;

    // Northwest-corner start; ties advance a single index so the basis
    // stays a spanning tree with exactly ns + nt - 1 cells.
    std::vector<Cell> basis;
    basis.reserve(nbasic);
    {
        int i = 0, j = 0;
        double ra = a[0], rb = b[0];
        while (true) {
            const double x = std::min(ra, rb);
            basis.push_back({i, j, x});
            ra -= x;
            rb -= x;
            if (i == ns - 1 && j == nt - 1) break;
            if (ra <= rb) {
                if (i + 1 < ns) ra = a[++i];
                else rb = b[++j];
            } else {
                if (j + 1 < nt) rb = b[++j];
                else ra = a[++i];
            }
        }
    }

    std::vector<char> in_basis(static_cast<std::size_t>(ns) * nt, 0);
    // Row node i is node i, column node j is node ns + j.
    std::vector<std::vector<int>> adj(nodes);
    for (int s = 0; s < nbasic; ++s) {
        in_basis[static_cast<std::size_t>(basis[s].i) * nt + basis[s].j] = 1;
        adj[basis[s].i].push_back(s);
        adj[ns + basis[s].j].push_back(s);
    }

    double cmax = 0.0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) cmax = std::max(cmax, std::abs(cost(i, j)));
    const double eps = 1e-11 * (1.0 + cmax);

    std::vector<double> u(ns), v(nt);
    std::vector<int> stack, parent_node(nodes), parent_cell(nodes);
    std::vector<char> seen(nodes);

    const int max_pivots = 200000;
    const int bland_after = 20000;
    int pivot = 0;
    for (;; ++pivot) {
        if (pivot >= max_pivots)
            throw std::runtime_error("transportation simplex: pivot limit exceeded");

        // Duals from the basis tree, rooted at row 0.
        std::fill(seen.begin(), seen.end(), 0);
        u[0] = 0.0;
        seen[0] = 1;
        stack.assign(1, 0);
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (int s : adj[node]) {
                const int other = (node < ns) ? ns + basis[s].j : basis[s].i;
                if (seen[other]) continue;
                seen[other] = 1;
                if (other >= ns) v[other - ns] = cost(basis[s].i, basis[s].j) - u[basis[s].i];
                else u[other] = cost(basis[s].i, basis[s].j) - v[basis[s].j];
                stack.push_back(other);
            }
        }

        // Entering cell.
        int ei = -1, ej = -1;
        const bool bland = pivot >= bland_after;
        double best = -eps;
        for (int i = 0; i < ns && !(bland && ei >= 0); ++i) {
            for (int j = 0; j < nt; ++j) {
                if (in_basis[static_cast<std::size_t>(i) * nt + j]) continue;
                const double rc = cost(i, j) - u[i] - v[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                    if (bland) break;
                }
            }
        }
        if (ei < 0) break; // optimal

        // Unique tree path from row ei to column ej.
        std::fill(seen.begin(), seen.end(), 0);
        seen[ei] = 1;
        parent_node[ei] = -1;
        stack.assign(1, ei);
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node == ns + ej) break;
            for (int s : adj[node]) {
                const int other = (node < ns) ? ns + basis[s].j : basis[s].i;
                if (seen[other]) continue;
                seen[other] = 1;
                parent_node[other] = node;
                parent_cell[other] = s;
                stack.push_back(other);
            }
        }

        // Cells along the path, listed from the ej end back to ei; signs
        // alternate starting with - on the cell adjacent to the entering one.
        std::vector<int> path;
        for (int node = ns + ej; node != ei; node = parent_node[node])
            path.push_back(parent_cell[node]);

        double theta = std::numeric_limits<double>::infinity();
        int leave_pos = -1;
        for (std::size_t t = 0; t < path.size(); t += 2) {
            const Cell& c = basis[path[t]];
            if (c.x < theta - 1e-18 ||
                (leave_pos >= 0 && c.x <= theta + 1e-18 &&
                 (c.i < basis[path[leave_pos]].i ||
                  (c.i == basis[path[leave_pos]].i && c.j < basis[path[leave_pos]].j)))) {
                theta = c.x;
                leave_pos = static_cast<int>(t);
            }
        }
        theta = std::max(theta, 0.0);

        for (std::size_t t = 0; t < path.size(); ++t) {
            basis[path[t]].x += (t % 2 == 0) ? -theta : theta;
            if (basis[path[t]].x < 0.0) basis[path[t]].x = 0.0;
        }

        // Swap the leaving cell out, the entering cell in.
        const int slot = path[leave_pos];
        const Cell leaving = basis[slot];
        in_basis[static_cast<std::size_t>(leaving.i) * nt + leaving.j] = 0;
        auto drop = [&](int node) {
            auto& lst = adj[node];
            lst.erase(std::find(lst.begin(), lst.end(), slot));
        };
        drop(leaving.i);
        drop(ns + leaving.j);
        basis[slot] = {ei, ej, theta};
        in_basis[static_cast<std::size_t>(ei) * nt + ej] = 1;
        adj[ei].push_back(slot);
        adj[ns + ej].push_back(slot);
    }

    if (pivots_out) *pivots_out = pivot;
    return basis;
}

ExactTransport solve(const DiscreteMeasure& source, const DiscreteMeasure& target,
                     const std::function<double(std::size_t, std::size_t)>& grid_cost) {
    if (source.spec() != target.spec())
        throw std::invalid_argument("exact transport: measures must share a grid");

    std::vector<std::size_t> src, dst;
    std::vector<double> a, b;
    for (std::size_t k = 0; k < source.mass().size(); ++k)
        if (source.mass()[k] > 0.0) {
            src.push_back(k);
            a.push_back(source.mass()[k]);
        }
    for (std::size_t k = 0; k < target.mass().size(); ++k)
        if (target.mass()[k] > 0.0) {
            dst.push_back(k);
            b.push_back(target.mass()[k]);
        }
    if (src.size() > kExactTransportSupportCap || dst.size() > kExactTransportSupportCap)
        throw std::invalid_argument("exact transport: support exceeds the oracle size cap");

    // Balance the sides exactly; both sums are 1 up to representation.
    double sa = 0.0, sb = 0.0;
    for (double x : a) sa += x;
    for (double x : b) sb += x;
    for (double& x : b) x *= sa / sb;

    int pivots = 0;
    const std::vector<Cell> basis = transportation_simplex(
        a, b, [&](int i, int j) { return grid_cost(src[i], dst[j]); }, &pivots);

    std::vector<PlanAtom> atoms;
    double cost = 0.0;
    for (const Cell& c : basis) {
        if (c.x <= 0.0) continue;
        atoms.push_back({src[c.i], dst[c.j], c.x});
        cost += c.x * grid_cost(src[c.i], dst[c.j]);
    }
    TransportPlan plan =
        TransportPlan::from_atoms(source.spec(), std::move(atoms), source.mass(), target.mass());
    return ExactTransport{std::move(plan), cost, pivots};
}

} // namespace

ExactTransport exact_transport(const DiscreteMeasure& source, const DiscreteMeasure& target) {
    const GridSpec& spec = source.spec();
    return solve(source, target, [&](std::size_t k, std::size_t l) { return spec.squared_distance(k, l); });
}

ExactTransport exact_transport(const DiscreteMeasure& source, const DiscreteMeasure& target,
                               const CostMatrix& cost) {
    if (cost.size() != source.spec().size())
        throw std::invalid_argument("exact transport: cost matrix size must equal grid size");
    return solve(source, target, [&](std::size_t k, std::size_t l) { return cost(k, l); });
}

double exact_w2_discrete(const DiscreteMeasure& source, const DiscreteMeasure& target,
                         const CostMatrix& cost) {
    return exact_transport(source, target, cost).cost;
}

double exact_w2_discrete(const DiscreteMeasure& source, const DiscreteMeasure& target) {
    return exact_transport(source, target).cost;
}

} // namespace wassreg
