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

/**
 * \file mixture.hpp
 * \brief 3D Gaussian mixtures: EM fitting seeded from dbscan clusters, and
 * evaluation onto the 2D (x, y) grid with z marginalized out.
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radfed/dbscan.hpp"
#include "radfed/grid.hpp"
#include "radfed/types.hpp"

namespace radfed {

struct GaussianComponent {
  double weight = 0.0;
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  std::int64_t point_count = 0;  // points this component represents
};

struct GaussianMixture {
  std::vector<GaussianComponent> components;
  std::int64_t total_points = 0;

  bool empty() const { return components.empty(); }
  int size() const { return static_cast<int>(components.size()); }
};

/// Checks weights, covariance symmetry and positive-definiteness, and the
/// point-count sum. On failure returns false and, if given, fills `why`.
bool is_valid(const GaussianMixture& mixture, std::string* why = nullptr);

/// Eigenvalues of the symmetrized matrix clipped from below at `floor`.
Mat3 floor_covariance(const Mat3& cov, double floor);

/// Number of mixture components for a clustered cloud: min(n_clusters, m_max).
int choose_components(const ClusterResult& clusters, int m_max);

struct EmOptions {
  int max_iters = 100;
  double tol = 1e-6;              // on mean log-likelihood per unit weight
  double cov_floor = 0.042 * 0.042;  // eigenvalue floor, m^2
};

/// Starting point for EM: means plus optional covariances and weights.
struct EmInit {
  std::vector<Vec3> means;
  std::vector<Mat3> covariances;  // empty, or one per mean
  std::vector<double> weights;    // empty, or one per mean
};

/// The `m` largest clusters (ties to the lower id), in cluster-id order, as
/// centroid, floored covariance and size-proportional weight.
EmInit init_from_clusters(std::span<const Vec3> points, const ClusterResult& clusters, int m,
                          double cov_floor);

struct EmReport {
  std::vector<double> loglik_trace;  // mean log-likelihood at each E-step
  int iterations = 0;                // M-steps performed
  bool converged = false;
  bool reduced_components = false;   // fewer points than components
};

/**
 * Weighted EM for a Gaussian mixture.
 *
 * `weights` (optional, one per point) scale each point's contribution. The
 * M-step clips covariance eigenvalues at `cov_floor`, which is the
 * constrained maximizer, so the log-likelihood stays nondecreasing. Stops
 * when the mean log-likelihood gains less than `tol` or after `max_iters`
 * M-steps. Each component's point_count is its rounded share of the
 * (unweighted) responsibilities, with largest-remainder rounding so the
 * counts add up to the number of points.
 */
GaussianMixture fit_em(std::span<const Vec3> points, int components, const EmInit& init,
                       const EmOptions& options, std::span<const double> weights = {},
                       EmReport* report = nullptr);

/// Mixture density marginalized over z, times cell area, at each cell center;
/// normalized to unit mass. An empty mixture gives the uniform grid.
DensityGrid eval_on_grid(const GaussianMixture& mixture, const GridSpec& spec);

}  // namespace radfed
