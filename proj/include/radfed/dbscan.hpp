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

#include <span>
#include <vector>

#include "radfed/types.hpp"

namespace radfed {

inline constexpr int kOutlier = -1;

struct ClusterResult {
  std::vector<int> labels;  // cluster id in [0, n_clusters) or kOutlier
  int n_clusters = 0;
};

/**
 * Density clustering in 3D.
 *
 * A point is core when at least `min_pts` points (itself included) lie within
 * `eps`. Core points closer than `eps` share a cluster; clusters are numbered
 * by their lowest-index core point. A non-core point within `eps` of a core
 * point joins the cluster of its lowest-index core neighbor. Everything else
 * is kOutlier.
 */
ClusterResult dbscan(std::span<const Vec3> points, double eps, int min_pts);

/// Per-cluster sizes, indexed by cluster id.
std::vector<std::size_t> cluster_sizes(const ClusterResult& clusters);

}  // namespace radfed
