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

#include "radfed/dbscan.hpp"

#include <cstdint>

#include "radfed/kernels.hpp"

namespace radfed {

ClusterResult dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  if (!(eps > 0.0) || min_pts < 1) {
    throw ContractError("dbscan: need eps > 0 and min_pts >= 1");
  }
  const std::size_t n = points.size();
  ClusterResult result;
  result.labels.assign(n, kOutlier);
  if (n == 0) return result;

  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].x();
    ys[i] = points[i].y();
    zs[i] = points[i].z();
  }

  // Neighbor lists in CSR form; every list is ascending.
  const auto& k = kernels::active();
  const double r2 = eps * eps;
  std::vector<std::uint32_t> scratch(n);
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> adjacency;
  adjacency.reserve(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = k.within_radius(xs.data(), ys.data(), zs.data(), n, xs[i], ys[i],
                                          zs[i], r2, scratch.data());
    adjacency.insert(adjacency.end(), scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(c));
    offsets[i + 1] = adjacency.size();
  }

  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    core[i] = offsets[i + 1] - offsets[i] >= static_cast<std::size_t>(min_pts);
  }

  // Core-to-core flood fill, seeded in index order.
  std::vector<std::uint32_t> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || result.labels[seed] != kOutlier) continue;
    const int id = result.n_clusters++;
    result.labels[seed] = id;
    stack.assign(1, static_cast<std::uint32_t>(seed));
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      for (std::size_t a = offsets[p]; a < offsets[p + 1]; ++a) {
        const std::uint32_t q = adjacency[a];
        if (core[q] && result.labels[q] == kOutlier) {
          result.labels[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Border points follow their lowest-index core neighbor.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t a = offsets[i]; a < offsets[i + 1]; ++a) {
      const std::uint32_t q = adjacency[a];
      if (core[q]) {
        result.labels[i] = result.labels[q];
        break;
      }
    }
  }
  return result;
}

std::vector<std::size_t> cluster_sizes(const ClusterResult& clusters) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(clusters.n_clusters), 0);
  for (int l : clusters.labels) {
    if (l != kOutlier) ++sizes[static_cast<std::size_t>(l)];
  }
  return sizes;
}

}  // namespace radfed
