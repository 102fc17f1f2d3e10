#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Optional linear preprocessing of a 2-D response (w1, w2) -> (w1, w2 - w1),
//! i.e. keep the minimum and replace the maximum by the range, which lets
//! one rectangle support all joint distributions.
enum class ResponseTransform { none, min_range };

//! Raw (predictor, response point) rows loaded from a CSV with header
//! `x1[,x2...],w1[,w2...]`; response dimension d in {1, 2}.
struct RawObservations {
    int predictor_dim = 1;
    int response_dim = 1;
    std::vector<double> predictors; //!< n x predictor_dim, row-major
    std::vector<double> responses;  //!< n x response_dim, row-major

    std::size_t rows() const { return responses.size() / static_cast<std::size_t>(response_dim); }
    double predictor(std::size_t i, int a = 0) const {
        return predictors[i * static_cast<std::size_t>(predictor_dim) + a];
    }

    static RawObservations load_csv(const std::string& path,
                                    ResponseTransform transform = ResponseTransform::none);
};

struct PredictorBin {
    double center;
    std::vector<std::size_t> rows;
};

struct BinReport {
    std::size_t dropped_out_of_range = 0;
    std::size_t empty_bins_dropped = 0;
};

//! Splits rows into equidistant bins over the (scalar) predictor range, or
//! over an explicit range, dropping out-of-range rows with a count. Empty
//! bins are dropped with a count; all rows landing in a single bin is an
//! error.
std::vector<PredictorBin> bin_by_predictor(const RawObservations& data, int bins,
                                           std::optional<std::pair<double, double>> range = std::nullopt,
                                           BinReport* report = nullptr);

//! 1-D rule-of-thumb bandwidth 0.9 min(sd, IQR/1.349) n^(-1/5).
double silverman_bandwidth(std::span<const double> x);

//! Per-axis rule-of-thumb bandwidths sigma_a (4 / ((d+2) n))^(1/(d+4)).
std::vector<double> silverman_bandwidth_nd(std::span<const double> points, int d);

//! Sheather-Jones solve-the-equation plug-in bandwidth for 1-D samples.
double sheather_jones_bandwidth(std::span<const double> x);

//! Gaussian product-kernel density estimate evaluated on the grid nodes and
//! renormalized to integrate to 1 over the rectangle. Empty bandwidth means
//! the per-axis rule of thumb (needs >= 5 points and positive variance).
//! Duplicate points are merged exactly, so concatenating a sample with
//! itself changes nothing when the bandwidth is explicit.
DensityGrid kde_on_grid(std::span<const double> points, const GridSpec& spec,
                        std::span<const double> bandwidth = {});

} // namespace wassreg
