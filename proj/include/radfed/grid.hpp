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
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "radfed/types.hpp"

namespace radfed {

/// Regular 2D grid over the monitored area. Cells are stored row-major with
/// rows along y: index = iy * nx + ix.
struct GridSpec {
  double x_min = 0.0;
  double y_min = 0.0;
  double resolution = 0.05;
  int nx = 0;
  int ny = 0;

  static GridSpec from_extent(double x_min, double y_min, double x_max, double y_max,
                              double resolution);

  std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  double x_max() const { return x_min + resolution * nx; }
  double y_max() const { return y_min + resolution * ny; }
  double cell_area() const { return resolution * resolution; }
  double center_x(int ix) const { return x_min + (ix + 0.5) * resolution; }
  double center_y(int iy) const { return y_min + (iy + 0.5) * resolution; }
  Vec2 center(std::size_t index) const {
    return {center_x(static_cast<int>(index % static_cast<std::size_t>(nx))),
            center_y(static_cast<int>(index / static_cast<std::size_t>(nx)))};
  }
  /// Cell holding (x, y), or nothing outside the grid.
  std::optional<std::size_t> cell_of(double x, double y) const;
  bool valid() const { return resolution > 0.0 && nx > 0 && ny > 0; }

  bool operator==(const GridSpec&) const = default;
};

/// Cell-center coordinates, flattened in cell order.
struct GridCenters {
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Cached per thread; the reference stays valid until the next call with a
/// different spec on the same thread.
const GridCenters& grid_centers(const GridSpec& spec);

/// Discrete probability mass over a GridSpec.
struct DensityGrid {
  GridSpec spec;
  std::vector<double> mass;

  static DensityGrid zeros(const GridSpec& spec);
  static DensityGrid uniform(const GridSpec& spec);

  double sum() const;
  double max() const;
  /// Scales to unit total mass; an all-zero grid becomes uniform.
  void normalize();
  std::size_t argmax() const;
  /// True when every cell holds the same value.
  bool is_flat() const;
};

/**
 * KL divergence D(p || q) on a shared grid.
 *
 * Both grids are floored at `floor` and renormalized before the sum, so the
 * result is finite for disjoint supports. Throws ContractError when the
 * grids differ in extent or resolution.
 */
double kl_divergence(const DensityGrid& p, const DensityGrid& q, double floor = 1e-12);

/// Header line with extent and resolution, then ny rows of nx values.
void write_grid_csv(const DensityGrid& grid, const std::filesystem::path& path);
DensityGrid read_grid_csv(const std::filesystem::path& path);

}  // namespace radfed
