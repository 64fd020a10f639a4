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
 * \file fusion.hpp
 * \brief Grid Bayes filter over the room: likelihoods from clouds, the motion
 * prior, cooperative, local and federated posteriors, and MAP extraction.
 *
 * Local and federated posterior grids are evaluations of Gaussian mixtures.
 * A prior enters a local fit by weighting the points of the EM fit with the
 * prior value at each point (relative to the prior's peak, plus
 * `prior_floor`), so the mixture a radar broadcasts is the one its grid is
 * drawn from. The cooperative posterior multiplies the pooled likelihood grid
 * cell by cell with the same floored prior. A flat prior leaves every
 * likelihood unchanged.
 */
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radfed/dbscan.hpp"
#include "radfed/grid.hpp"
#include "radfed/mixture.hpp"
#include "radfed/sensor.hpp"

namespace radfed {

enum class PosteriorKind { Local, Global, Federated };

struct Posterior {
  DensityGrid grid;
  GaussianMixture mixture;
  Epoch epoch = 0;
  PosteriorKind kind = PosteriorKind::Local;
};

struct ReconstructedScene {
  GridSpec spec;
  std::vector<std::size_t> cells;  // ascending cell indices
  std::vector<Vec2> points;        // cell centers, same order
  double tau = 0.0;
  Epoch epoch = 0;
  bool degenerate = false;  // posterior was flat
};

struct TargetEstimates {
  std::vector<Vec2> positions;  // descending posterior value
  Epoch epoch = 0;
};

struct FusionParams {
  int m_max = 8;
  EmOptions em;
  double prior_floor = 1.0;
};

/// A preprocessed cloud and its clustering, as one ensemble member.
struct ClusteredCloud {
  PointCloud cloud;
  ClusterResult clusters;
};

struct Likelihood {
  DensityGrid grid;
  GaussianMixture mixture;
};

/// EM fit on one global-frame cloud with choose_components(clusters)
/// components seeded at the cluster centroids. Empty cloud: uniform grid.
Likelihood likelihood_from_cloud(const PointCloud& cloud, const ClusterResult& clusters,
                                 const GridSpec& spec, const FusionParams& params);

/// Sum of isotropic Gaussians of std v*dt + sigma_floor at the scene points,
/// normalized. An empty scene, or one covering the whole grid, gives the
/// uniform grid.
DensityGrid motion_prior(const ReconstructedScene& prev, double v, double dt, double sigma_floor,
                         const GridSpec& spec);

/// Per-point EM weights prior(cell) / max(prior) + floor. Empty when the prior
/// is flat. Points off the grid get `floor`.
std::vector<double> prior_weights(const DensityGrid& prior, std::span<const Vec3> points,
                                  double floor);

/// Likelihood of the pooled ensemble: one fit with the sum of per-member
/// component counts, seeded from every member's clusters.
Likelihood pooled_likelihood(std::span<const ClusteredCloud> ensemble, const GridSpec& spec,
                             const FusionParams& params);

/// Global posterior from a pooled ensemble. All clouds empty: the prior.
Posterior coop_posterior(std::span<const ClusteredCloud> ensemble, const DensityGrid& prior,
                         const GridSpec& spec, const FusionParams& params);

/// Local posterior from one cloud. Its mixture is the P_k a radar transmits.
/// Empty cloud: the prior, with an empty mixture.
Posterior local_posterior(const PointCloud& cloud, const ClusterResult& clusters,
                          const DensityGrid& prior, const GridSpec& spec,
                          const FusionParams& params);

struct AlphaWeights {
  std::vector<double> alpha;
  bool degenerate = false;  // every count was zero; weights are uniform
};

/// alpha_k = Q_k / sum(Q). The last radar with a nonzero count takes the
/// remainder so the weights sum to exactly 1.
AlphaWeights alpha_weights(std::span<const std::int64_t> counts);

/// alpha-weighted union of mixtures (own first, then received, matching
/// `alpha`), evaluated on the grid. All mixtures empty: uniform.
Posterior federated_posterior(const GaussianMixture& own,
                              std::span<const GaussianMixture> received,
                              std::span<const double> alpha, const GridSpec& spec,
                              Epoch epoch = 0);

/// Cells whose peak-normalized value exceeds tau.
ReconstructedScene reconstruct_scene(const DensityGrid& grid, double tau, Epoch epoch = 0);
ReconstructedScene reconstruct_scene(const Posterior& posterior, double tau);

/**
 * MAP targets: cells above tau (peak-normalized) that are >= all of their
 * 8 neighbors, taken greedily by descending value (ties to the lower cell
 * index) while at least `min_separation` from every accepted one. A flat grid
 * carries no information and yields nothing.
 */
TargetEstimates extract_targets(const DensityGrid& grid, double tau, double min_separation,
                                Epoch epoch = 0);
TargetEstimates extract_targets(const Posterior& posterior, double tau, double min_separation);

}  // namespace radfed
