#include "wassreg/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "wassreg/measure_io.hpp"

namespace wassreg {

namespace {

struct Rgb {
    unsigned char r, g, b;
};

//! Compact viridis-like ramp.
Rgb colormap(double t) {
    static const double stops[6][3] = {
        {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
        {0.164, 0.471, 0.558}, {0.478, 0.821, 0.318}, {0.993, 0.906, 0.144},
    };
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * 5.0;
    const int s = std::min(static_cast<int>(pos), 4);
    const double f = pos - s;
    Rgb c;
    c.r = static_cast<unsigned char>(255.0 * ((1 - f) * stops[s][0] + f * stops[s + 1][0]));
    c.g = static_cast<unsigned char>(255.0 * ((1 - f) * stops[s][1] + f * stops[s + 1][1]));
    c.b = static_cast<unsigned char>(255.0 * ((1 - f) * stops[s][2] + f * stops[s + 1][2]));
    return c;
}

void write_ppm(const GridSpec& spec, const std::vector<double>& values, const std::string& path) {
    if (spec.dim() != 2) throw std::invalid_argument("render_heatmap: grid must be 2-D");
    const int n0 = spec.count(0), n1 = spec.count(1);
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;

    // Upscale small grids so the image is comfortably viewable.
    const int scale = std::max(1, 256 / std::max(n0, n1));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "P6\n" << n1 * scale << ' ' << n0 * scale << "\n255\n";
    // Row 0 of the image is the top: the largest axis-0 coordinate.
    for (int r = n0 * scale - 1; r >= 0; --r) {
        const int i0 = r / scale;
        for (int c = 0; c < n1 * scale; ++c) {
            const int i1 = c / scale;
            const double v = values[static_cast<std::size_t>(i0) * n1 + i1] / vmax;
            const Rgb px = colormap(v);
            out.put(static_cast<char>(px.r));
            out.put(static_cast<char>(px.g));
            out.put(static_cast<char>(px.b));
        }
    }
    if (!out) throw std::runtime_error("failed writing: " + path);
}

} // namespace

void render_heatmap(const DiscreteMeasure& measure, const std::string& path) {
    write_ppm(measure.spec(), measure.mass(), path);
    write_grid_csv(path + ".csv", measure.spec(), measure.mass());
}

void render_heatmap(const DensityGrid& density, const std::string& path) {
    write_ppm(density.spec(), density.values(), path);
    write_grid_csv(path + ".csv", density.spec(), density.values());
}

} // namespace wassreg
