#include "wassreg/measure_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wassreg {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

void write_grid_csv(const std::string& path, const GridSpec& spec, const std::vector<double>& values) {
    if (values.size() != spec.size())
        throw std::invalid_argument("grid file: value count must equal grid size");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << spec.dim();
    for (int a = 0; a < spec.dim(); ++a) out << ',' << spec.count(a);
    for (int a = 0; a < spec.dim(); ++a) out << ',' << format_double(spec.lower(a));
    for (int a = 0; a < spec.dim(); ++a) out << ',' << format_double(spec.upper(a));
    out << '\n';
    for (double v : values) out << format_double(v) << '\n';
    if (!out) throw std::runtime_error("failed writing: " + path);
}

GridFile read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty grid file: " + path);

    std::vector<double> fields;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) throw std::runtime_error("malformed header in " + path);
            fields.push_back(std::stod(tok));
        }
    }
    if (fields.empty()) throw std::runtime_error("malformed header in " + path);
    const int dim = static_cast<int>(fields[0]);
    if (dim < 1 || fields.size() != static_cast<std::size_t>(1 + 3 * dim))
        throw std::runtime_error("malformed header in " + path);

    std::vector<int> counts(dim);
    std::vector<double> lower(dim), upper(dim);
    for (int a = 0; a < dim; ++a) counts[a] = static_cast<int>(fields[1 + a]);
    for (int a = 0; a < dim; ++a) lower[a] = fields[1 + dim + a];
    for (int a = 0; a < dim; ++a) upper[a] = fields[1 + 2 * dim + a];
    GridSpec spec(lower, upper, counts);

    std::vector<double> values;
    values.reserve(spec.size());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line));
    }
    if (values.size() != spec.size())
        throw std::runtime_error("grid file " + path + ": expected " + std::to_string(spec.size()) +
                                 " values, found " + std::to_string(values.size()));
    return GridFile{std::move(spec), std::move(values)};
}

void write_density(const std::string& path, const DensityGrid& density) {
    write_grid_csv(path, density.spec(), density.values());
}

void write_measure(const std::string& path, const DiscreteMeasure& measure) {
    write_grid_csv(path, measure.spec(), measure.mass());
}

DensityGrid load_density(const std::string& path) {
    GridFile f = read_grid_csv(path);
    return DensityGrid(std::move(f.spec), std::move(f.values));
}

DiscreteMeasure load_measure(const std::string& path) {
    GridFile f = read_grid_csv(path);
    return DiscreteMeasure(std::move(f.spec), std::move(f.values));
}

} // namespace wassreg
