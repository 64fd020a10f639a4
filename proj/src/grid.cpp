// Copyright 2026, The radfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "radfed/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "radfed/csv.hpp"
#include "radfed/kernels.hpp"

namespace radfed {

GridSpec GridSpec::from_extent(double x_min, double y_min, double x_max, double y_max,
                               double resolution) {
  if (!(resolution > 0.0) || !(x_max > x_min) || !(y_max > y_min)) {
    throw ConfigError("grid: need resolution > 0 and a non-empty extent");
  }
  GridSpec spec;
  spec.x_min = x_min;
  spec.y_min = y_min;
  spec.resolution = resolution;
  spec.nx = static_cast<int>(std::lround((x_max - x_min) / resolution));
  spec.ny = static_cast<int>(std::lround((y_max - y_min) / resolution));
  if (spec.nx < 1 || spec.ny < 1) throw ConfigError("grid: extent smaller than one cell");
  return spec;
}

std::optional<std::size_t> GridSpec::cell_of(double x, double y) const {
  const double fx = std::floor((x - x_min) / resolution);
  const double fy = std::floor((y - y_min) / resolution);
  if (!(fx >= 0.0 && fx < nx && fy >= 0.0 && fy < ny)) return std::nullopt;
  return static_cast<std::size_t>(fy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(fx);
}

const GridCenters& grid_centers(const GridSpec& spec) {
  thread_local GridSpec cached_spec;
  thread_local GridCenters cached;
  if (cached.xs.size() == spec.cells() && cached_spec == spec) return cached;
  cached_spec = spec;
  cached.xs.resize(spec.cells());
  cached.ys.resize(spec.cells());
  for (int iy = 0; iy < spec.ny; ++iy) {
    for (int ix = 0; ix < spec.nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * static_cast<std::size_t>(spec.nx) +
                            static_cast<std::size_t>(ix);
      cached.xs[i] = spec.center_x(ix);
      cached.ys[i] = spec.center_y(iy);
    }
  }
  return cached;
}

DensityGrid DensityGrid::zeros(const GridSpec& spec) {
  return {spec, std::vector<double>(spec.cells(), 0.0)};
}

DensityGrid DensityGrid::uniform(const GridSpec& spec) {
  return {spec, std::vector<double>(spec.cells(), 1.0 / static_cast<double>(spec.cells()))};
}

double DensityGrid::sum() const { return kernels::active().sum(mass.data(), mass.size()); }

double DensityGrid::max() const { return kernels::active().max(mass.data(), mass.size()); }

void DensityGrid::normalize() {
  const double s = sum();
  if (!(s > 0.0) || !std::isfinite(s)) {
    *this = uniform(spec);
    return;
  }
  kernels::active().scale(mass.data(), mass.size(), 1.0 / s);
}

std::size_t DensityGrid::argmax() const {
  return static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

bool DensityGrid::is_flat() const {
  if (mass.empty()) return true;
  const auto [lo, hi] = std::minmax_element(mass.begin(), mass.end());
  return *lo == *hi;
}

double kl_divergence(const DensityGrid& p, const DensityGrid& q, double floor) {
  if (!(p.spec == q.spec) || p.mass.size() != q.mass.size()) {
    throw ContractError("kl_divergence: grids differ in extent or resolution");
  }
  if (!(floor > 0.0)) throw ContractError("kl_divergence: floor must be positive");
  const auto& k = kernels::active();
  const std::size_t n = p.mass.size();
  const double sp = k.floored_sum(p.mass.data(), n, floor);
  const double sq = k.floored_sum(q.mass.data(), n, floor);
  const double d = k.kl_terms(p.mass.data(), q.mass.data(), n, floor, 1.0 / sp, 1.0 / sq);
  return std::max(0.0, d);
}

void write_grid_csv(const DensityGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid CSV: " + path.string());
  const GridSpec& s = grid.spec;
  out << "x_min,y_min,x_max,y_max,resolution,nx,ny\n";
  out << format_double(s.x_min) << ',' << format_double(s.y_min) << ','
      << format_double(s.x_max()) << ',' << format_double(s.y_max()) << ','
      << format_double(s.resolution) << ',' << s.nx << ',' << s.ny << '\n';
  for (int iy = 0; iy < s.ny; ++iy) {
    for (int ix = 0; ix < s.nx; ++ix) {
      if (ix) out << ',';
      out << format_double(grid.mass[static_cast<std::size_t>(iy) * static_cast<std::size_t>(s.nx) +
                                      static_cast<std::size_t>(ix)]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error while writing grid CSV: " + path.string());
}

DensityGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read grid CSV: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::getline(in, line);
  const auto head = split_csv_line(line);
  if (head.size() != 7) throw std::runtime_error("malformed grid CSV header: " + path.string());
  DensityGrid grid;
  grid.spec.x_min = parse_double(head[0]);
  grid.spec.y_min = parse_double(head[1]);
  grid.spec.resolution = parse_double(head[4]);
  grid.spec.nx = std::stoi(head[5]);
  grid.spec.ny = std::stoi(head[6]);
  grid.mass.reserve(grid.spec.cells());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (const auto& cell : split_csv_line(line)) grid.mass.push_back(parse_double(cell));
  }
  if (grid.mass.size() != grid.spec.cells()) {
    throw std::runtime_error("grid CSV cell count mismatch: " + path.string());
  }
  return grid;
}

}  // namespace radfed
