#pragma once

#include <string>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Writes a 2-D measure or density as a binary PPM heat map plus the
//! underlying grid as CSV at `path + ".csv"`; the CSV is the source of
//! truth, the image a convenience. Rejects grids that are not 2-D.
void render_heatmap(const DiscreteMeasure& measure, const std::string& path);
void render_heatmap(const DensityGrid& density, const std::string& path);

} // namespace wassreg
