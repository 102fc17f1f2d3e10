#pragma once

#include <string>
#include <vector>

#include "wassreg/grid.hpp"

namespace wassreg {

//! Raw contents of a grid file: the spec plus one value per grid point.
struct GridFile {
    GridSpec spec;
    std::vector<double> values;
};

//! Grid file format: a header line `dim,counts...,lowers...,uppers...`
//! followed by one flat value per line in row-major order (axis 0 slowest).
void write_grid_csv(const std::string& path, const GridSpec& spec, const std::vector<double>& values);

GridFile read_grid_csv(const std::string& path);

void write_density(const std::string& path, const DensityGrid& density);
void write_measure(const std::string& path, const DiscreteMeasure& measure);

DensityGrid load_density(const std::string& path);
DiscreteMeasure load_measure(const std::string& path);

//! Doubles are written with enough digits to round-trip exactly.
std::string format_double(double v);

} // namespace wassreg
