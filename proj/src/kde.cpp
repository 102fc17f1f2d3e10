#include "wassreg/kde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wassreg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double normal_pdf(double u) { return std::exp(-0.5 * u * u) * 0.3989422804014327; }

double stddev(std::span<const double> x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n > 1 ? n - 1 : 1));
}

double iqr(std::span<const double> x) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(s.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < s.size() ? (1.0 - frac) * s[lo] + frac * s[lo + 1] : s[lo];
    };
    return quantile(0.75) - quantile(0.25);
}

} // namespace

RawObservations RawObservations::load_csv(const std::string& path, ResponseTransform transform) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty observation file: " + path);

    int qx = 0, d = 0;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty() && (tok[0] == 'x' || tok[0] == 'X')) ++qx;
            else if (!tok.empty() && (tok[0] == 'w' || tok[0] == 'W')) ++d;
            else throw std::runtime_error("observation header columns must be x* or w*: " + path);
        }
    }
    require(qx >= 1, "observations: need at least one predictor column");
    require(d == 1 || d == 2, "observations: response dimension must be 1 or 2");
    if (transform == ResponseTransform::min_range)
        require(d == 2, "observations: min_range transform needs a 2-D response");

    RawObservations obs;
    obs.predictor_dim = qx;
    obs.response_dim = d;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (static_cast<int>(vals.size()) != qx + d)
            throw std::runtime_error(path + ": wrong column count on line " + std::to_string(lineno));
        for (double v : vals)
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": non-finite value on line " + std::to_string(lineno));
        for (int a = 0; a < qx; ++a) obs.predictors.push_back(vals[a]);
        if (transform == ResponseTransform::min_range) {
            obs.responses.push_back(vals[qx]);
            obs.responses.push_back(vals[qx + 1] - vals[qx]);
        } else {
            for (int a = 0; a < d; ++a) obs.responses.push_back(vals[qx + a]);
        }
    }
    require(obs.rows() > 0, "observations: no data rows");
    return obs;
}

std::vector<PredictorBin> bin_by_predictor(const RawObservations& data, int bins,
                                           std::optional<std::pair<double, double>> range,
                                           BinReport* report) {
    require(bins >= 2, "bin_by_predictor: need at least 2 bins");
    require(data.predictor_dim == 1, "bin_by_predictor: predictor must be scalar");
    const std::size_t n = data.rows();

    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
        require(lo < hi, "bin_by_predictor: empty range");
    } else {
        lo = hi = data.predictor(0);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, data.predictor(i));
            hi = std::max(hi, data.predictor(i));
        }
        require(lo < hi, "bin_by_predictor: all predictor values identical");
    }

    const double width = (hi - lo) / bins;
    std::vector<PredictorBin> all(bins);
    for (int b = 0; b < bins; ++b) all[b].center = lo + (b + 0.5) * width;

    BinReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = data.predictor(i);
        if (x < lo || x > hi) {
            ++rep.dropped_out_of_range;
            continue;
        }
        int b = static_cast<int>((x - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        all[b].rows.push_back(i);
    }

    std::vector<PredictorBin> kept;
    for (auto& bin : all) {
        if (bin.rows.empty()) ++rep.empty_bins_dropped;
        else kept.push_back(std::move(bin));
    }
    require(kept.size() >= 2, "bin_by_predictor: all rows fall into a single bin");
    if (report) *report = rep;
    return kept;
}

double silverman_bandwidth(std::span<const double> x) {
    require(x.size() >= 2, "silverman: need at least 2 points");
    const double sd = stddev(x);
    const double q = iqr(x) / 1.349;
    double spread = sd;
    if (q > 0.0) spread = std::min(spread, q);
    require(spread > 0.0, "zero variance point set");
    return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

std::vector<double> silverman_bandwidth_nd(std::span<const double> points, int d) {
    require(d >= 1, "silverman: dimension must be positive");
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    require(n >= 2, "silverman: need at least 2 points");
    std::vector<double> h(d);
    const double factor = std::pow(4.0 / ((d + 2) * static_cast<double>(n)), 1.0 / (d + 4));
    for (int a = 0; a < d; ++a) {
        std::vector<double> axis(n);
        for (std::size_t i = 0; i < n; ++i) axis[i] = points[i * d + a];
        const double sd = stddev(axis);
        require(sd > 0.0, "zero variance point set");
        h[a] = sd * factor;
    }
    return h;
}

double sheather_jones_bandwidth(std::span<const double> x) {
    const std::size_t n = x.size();
    require(n >= 5, "sheather-jones: need at least 5 points");
    const double sd = stddev(x);
    const double q = iqr(x) / 1.349;
    double lambda = sd;
    if (q > 0.0) lambda = std::min(lambda, q);
    require(lambda > 0.0, "zero variance point set");

    auto phi4 = [](double u) { return (u * u * u * u - 6.0 * u * u + 3.0) * normal_pdf(u); };
    auto phi6 = [](double u) {
        const double u2 = u * u;
        return (u2 * u2 * u2 - 15.0 * u2 * u2 + 45.0 * u2 - 15.0) * normal_pdf(u);
    };
    const double nn = static_cast<double>(n) * static_cast<double>(n - 1);

    // Pair sums include the diagonal, which keeps the phi4 functional
    // positive at small bandwidths.
    auto sd_functional = [&](double alpha) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s += phi4((x[i] - x[j]) / alpha);
        return s / (nn * std::pow(alpha, 5.0));
    };
    auto td_functional = [&](double b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s += phi6((x[i] - x[j]) / b);
        return -s / (nn * std::pow(b, 7.0));
    };

    const double a = 0.920 * lambda * std::pow(static_cast<double>(n), -1.0 / 7.0);
    const double b = 0.912 * lambda * std::pow(static_cast<double>(n), -1.0 / 9.0);
    const double sda = sd_functional(a);
    const double tdb = td_functional(b);
    if (!(sda > 0.0) || !(tdb > 0.0))
        throw std::runtime_error("sheather-jones: sample too sparse for the plug-in functionals");

    const double rk = 0.5 / std::sqrt(3.14159265358979323846); // roughness of the normal kernel
    auto gap = [&](double h) {
        const double alpha2 = 1.357 * std::pow(sda / tdb, 1.0 / 7.0) * std::pow(h, 5.0 / 7.0);
        const double sdd = sd_functional(alpha2);
        // A nonpositive functional means the plug-in target is effectively
        // infinite: h is below the solution.
        if (!(sdd > 0.0)) return -1.0;
        return h - std::pow(rk / (static_cast<double>(n) * sdd), 0.2);
    };

    const double hs = silverman_bandwidth(x);
    double lo = hs / 20.0, hi = hs * 20.0;
    double flo = gap(lo), fhi = gap(hi);
    if (flo > 0.0 || fhi < 0.0)
        throw std::runtime_error("sheather-jones: no bandwidth solves the plug-in equation");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = gap(mid);
        if (fm <= 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

DensityGrid kde_on_grid(std::span<const double> points, const GridSpec& spec,
                        std::span<const double> bandwidth) {
    const int d = spec.dim();
    require(points.size() % static_cast<std::size_t>(d) == 0,
            "kde: point array length must be a multiple of the grid dimension");
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    require(n >= 1, "kde: need at least one point");

    std::vector<double> h;
    if (bandwidth.empty()) {
        require(n >= 5, "kde: automatic bandwidth needs at least 5 points");
        h = d == 1 ? std::vector<double>{silverman_bandwidth(
                         std::span<const double>(points.data(), n))}
                   : silverman_bandwidth_nd(points, d);
    } else {
        require(bandwidth.size() == static_cast<std::size_t>(d), "kde: one bandwidth per axis");
        h.assign(bandwidth.begin(), bandwidth.end());
        for (double v : h) require(v > 0.0, "kde: bandwidths must be positive");
    }

    // Merge exactly equal points so the estimate depends on the multiset of
    // values through (point, count) pairs only.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        for (int c = 0; c < d; ++c) {
            const double va = points[a * d + c], vb = points[b * d + c];
            if (va != vb) return va < vb;
        }
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<double> unique_pts;
    std::vector<double> weight;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = order[r];
        if (r > 0 && !less(order[r - 1], i) && !less(i, order[r - 1])) {
            weight.back() += 1.0;
            continue;
        }
        for (int c = 0; c < d; ++c) unique_pts.push_back(points[i * d + c]);
        weight.push_back(1.0);
    }
    const std::size_t uniq = weight.size();
    for (double& w : weight) w /= static_cast<double>(n);

    const std::size_t m = spec.size();
    std::vector<double> values(m, 0.0);
    std::vector<int> idx(d);
    for (std::size_t g = 0; g < m; ++g) {
        spec.axis_indices(g, idx.data());
        double acc = 0.0;
        for (std::size_t u = 0; u < uniq; ++u) {
            double k = weight[u];
            for (int a = 0; a < d; ++a) {
                const double z = (spec.coordinate(a, idx[a]) - unique_pts[u * d + a]) / h[a];
                k *= normal_pdf(z) / h[a];
            }
            acc += k;
        }
        values[g] = acc;
    }
    return DensityGrid::normalized(spec, std::move(values));
}

} // namespace wassreg
