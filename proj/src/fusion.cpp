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

#include "radfed/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "radfed/kernels.hpp"

namespace radfed {
namespace {

void check_global(const PointCloud& cloud, const ClusterResult& clusters, const char* who) {
  if (cloud.frame != Frame::Global) {
    throw ContractError(std::string(who) + ": cloud must be in the global frame");
  }
  if (clusters.labels.size() != cloud.points.size()) {
    throw ContractError(std::string(who) + ": cluster labels do not match the cloud");
  }
}

// Seeds for one ensemble member; a cloud without clusters gets its centroid.
EmInit member_init(const PointCloud& cloud, const ClusterResult& clusters, int m,
                   double cov_floor) {
  if (m > 0) return init_from_clusters(cloud.points, clusters, m, cov_floor);
  EmInit init;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : cloud.points) mean += p;
  init.means.push_back(mean / static_cast<double>(cloud.points.size()));
  init.weights.push_back(1.0);
  return init;
}

Likelihood fit_on_grid(std::span<const Vec3> points, int m, const EmInit& init,
                       const GridSpec& spec, const FusionParams& params,
                       std::span<const double> weights) {
  Likelihood out;
  out.mixture = fit_em(points, m, init, params.em, weights);
  out.grid = eval_on_grid(out.mixture, spec);
  return out;
}

struct PooledInputs {
  std::vector<Vec3> points;
  EmInit init;
  int components = 0;
};

// Concatenated clouds, with every member's cluster seeds weighted by the
// member's share of the points.
PooledInputs pool(std::span<const ClusteredCloud> ensemble, const FusionParams& params) {
  PooledInputs out;
  std::size_t total = 0;
  for (const auto& member : ensemble) {
    check_global(member.cloud, member.clusters, "coop_posterior");
    total += member.cloud.points.size();
  }
  bool all_cov = true;
  for (const auto& member : ensemble) {
    if (member.cloud.points.empty()) continue;
    const int m = choose_components(member.clusters, params.m_max);
    const EmInit part = member_init(member.cloud, member.clusters, m, params.em.cov_floor);
    const double share =
        static_cast<double>(member.cloud.points.size()) / static_cast<double>(total);
    all_cov = all_cov && !part.covariances.empty();
    for (std::size_t j = 0; j < part.means.size(); ++j) {
      out.init.means.push_back(part.means[j]);
      if (!part.covariances.empty()) out.init.covariances.push_back(part.covariances[j]);
      out.init.weights.push_back(part.weights[j] * share);
    }
    out.components += std::max(m, 1);
    out.points.insert(out.points.end(), member.cloud.points.begin(), member.cloud.points.end());
  }
  // A centroid-only seed carries no covariance; fall back to pooled ones.
  if (!all_cov) out.init.covariances.clear();
  return out;
}

// Gaussian row kernel exp(-(d*res)^2 / 2 sigma^2) for |d| <= radius.
std::vector<double> row_kernel(double sigma, double resolution, int max_radius) {
  const int radius =
      std::min(max_radius, static_cast<int>(std::ceil(10.0 * sigma / resolution)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  for (int d = -radius; d <= radius; ++d) {
    const double x = d * resolution;
    k[static_cast<std::size_t>(d + radius)] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return k;
}

}  // namespace

Likelihood likelihood_from_cloud(const PointCloud& cloud, const ClusterResult& clusters,
                                 const GridSpec& spec, const FusionParams& params) {
  check_global(cloud, clusters, "likelihood_from_cloud");
  if (cloud.points.empty()) return {DensityGrid::uniform(spec), GaussianMixture{}};
  const int m = choose_components(clusters, params.m_max);
  const EmInit init = member_init(cloud, clusters, m, params.em.cov_floor);
  return fit_on_grid(cloud.points, std::max(m, 1), init, spec, params, {});
}

DensityGrid motion_prior(const ReconstructedScene& prev, double v, double dt, double sigma_floor,
                         const GridSpec& spec) {
  if (!(dt > 0.0) || !(v >= 0.0)) throw ContractError("motion_prior: need dt > 0 and v >= 0");
  if (prev.points.empty() || (prev.spec == spec && prev.cells.size() == spec.cells())) {
    return DensityGrid::uniform(spec);
  }
  const double sigma = v * dt + sigma_floor;
  if (!(sigma > 0.0)) throw ContractError("motion_prior: spread must be positive");
  const auto& k = kernels::active();
  DensityGrid out = DensityGrid::zeros(spec);

  if (prev.spec == spec && prev.cells.size() == prev.points.size()) {
    // Scene points sit on cell centers, so the sum separates into a row pass
    // and a column pass over the indicator grid.
    const auto nx = static_cast<std::size_t>(spec.nx);
    const auto ny = static_cast<std::size_t>(spec.ny);
    const auto kx = row_kernel(sigma, spec.resolution, spec.nx - 1);
    const auto ky = row_kernel(sigma, spec.resolution, spec.ny - 1);
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);

    std::vector<double> indicator(spec.cells(), 0.0);
    std::vector<char> row_used(ny, 0);
    for (std::size_t c : prev.cells) {
      indicator[c] = 1.0;
      row_used[c / nx] = 1;
    }
    std::vector<double> rows(spec.cells(), 0.0);
    for (std::size_t iy = 0; iy < ny; ++iy) {
      if (!row_used[iy]) continue;
      const double* src = indicator.data() + iy * nx;
      double* dst = rows.data() + iy * nx;
      for (int d = -rx; d <= rx; ++d) {
        const double w = kx[static_cast<std::size_t>(d + rx)];
        // dst[ix] += w * src[ix - d]
        if (d >= 0) {
          const auto s = static_cast<std::size_t>(d);
          if (s < nx) k.axpy(w, src, dst + s, nx - s);
        } else {
          const auto s = static_cast<std::size_t>(-d);
          if (s < nx) k.axpy(w, src + s, dst, nx - s);
        }
      }
    }
    for (std::size_t iy = 0; iy < ny; ++iy) {
      double* dst = out.mass.data() + iy * nx;
      for (int d = -ry; d <= ry; ++d) {
        const long src_row = static_cast<long>(iy) - d;
        if (src_row < 0 || src_row >= static_cast<long>(ny)) continue;
        if (!row_used[static_cast<std::size_t>(src_row)]) continue;
        k.axpy(ky[static_cast<std::size_t>(d + ry)],
               rows.data() + static_cast<std::size_t>(src_row) * nx, dst, nx);
      }
    }
  } else {
    const GridCenters& centers = grid_centers(spec);
    kernels::Gauss2 g;
    g.a = g.c = 1.0 / (sigma * sigma);
    g.b = 0.0;
    g.scale = 1.0;
    for (const auto& p : prev.points) {
      g.mx = p.x();
      g.my = p.y();
      k.gauss2_accumulate(centers.xs.data(), centers.ys.data(), spec.cells(), g, out.mass.data());
    }
  }
  out.normalize();
  return out;
}

std::vector<double> prior_weights(const DensityGrid& prior, std::span<const Vec3> points,
                                  double floor) {
  if (prior.is_flat()) return {};
  const double peak = prior.max();
  std::vector<double> w(points.size(), floor);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (const auto cell = prior.spec.cell_of(points[i].x(), points[i].y())) {
      w[i] += prior.mass[*cell] / peak;
    }
  }
  return w;
}

Likelihood pooled_likelihood(std::span<const ClusteredCloud> ensemble, const GridSpec& spec,
                             const FusionParams& params) {
  const PooledInputs in = pool(ensemble, params);
  if (in.points.empty()) return {DensityGrid::uniform(spec), GaussianMixture{}};
  return fit_on_grid(in.points, in.components, in.init, spec, params, {});
}

Posterior coop_posterior(std::span<const ClusteredCloud> ensemble, const DensityGrid& prior,
                         const GridSpec& spec, const FusionParams& params) {
  if (!(prior.spec == spec)) throw ContractError("coop_posterior: prior on a different grid");
  Posterior out;
  out.kind = PosteriorKind::Global;
  for (const auto& member : ensemble) out.epoch = std::max(out.epoch, member.cloud.epoch);
  const PooledInputs in = pool(ensemble, params);
  if (in.points.empty()) {
    out.grid = prior;
    return out;
  }
  auto fit = fit_on_grid(in.points, in.components, in.init, spec, params, {});
  out.grid = std::move(fit.grid);
  if (!prior.is_flat()) {
    const double peak = prior.max();
    for (std::size_t i = 0; i < out.grid.mass.size(); ++i) {
      out.grid.mass[i] *= prior.mass[i] / peak + params.prior_floor;
    }
    out.grid.normalize();
  }
  out.mixture = std::move(fit.mixture);
  return out;
}

Posterior local_posterior(const PointCloud& cloud, const ClusterResult& clusters,
                          const DensityGrid& prior, const GridSpec& spec,
                          const FusionParams& params) {
  check_global(cloud, clusters, "local_posterior");
  if (!(prior.spec == spec)) throw ContractError("local_posterior: prior on a different grid");
  Posterior out;
  out.kind = PosteriorKind::Local;
  out.epoch = cloud.epoch;
  if (cloud.points.empty()) {
    out.grid = prior;
    return out;
  }
  const int m = choose_components(clusters, params.m_max);
  const EmInit init = member_init(cloud, clusters, m, params.em.cov_floor);
  const auto weights = prior_weights(prior, cloud.points, params.prior_floor);
  auto fit = fit_on_grid(cloud.points, std::max(m, 1), init, spec, params, weights);
  out.grid = std::move(fit.grid);
  out.mixture = std::move(fit.mixture);
  return out;
}

AlphaWeights alpha_weights(std::span<const std::int64_t> counts) {
  AlphaWeights out;
  if (counts.empty()) return out;
  std::int64_t total = 0;
  for (auto q : counts) {
    if (q < 0) throw ContractError("alpha_weights: negative point count");
    total += q;
  }
  out.alpha.assign(counts.size(), 0.0);
  if (total == 0) {
    out.degenerate = true;
    std::fill(out.alpha.begin(), out.alpha.end(), 1.0 / static_cast<double>(counts.size()));
    return out;
  }
  std::size_t last = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) last = k;
  }
  double assigned = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (k == last) continue;
    out.alpha[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    assigned += out.alpha[k];
  }
  out.alpha[last] = 1.0 - assigned;
  return out;
}

Posterior federated_posterior(const GaussianMixture& own,
                              std::span<const GaussianMixture> received,
                              std::span<const double> alpha, const GridSpec& spec, Epoch epoch) {
  if (alpha.size() != received.size() + 1) {
    throw ContractError("federated_posterior: need one weight per mixture");
  }
  Posterior out;
  out.kind = PosteriorKind::Federated;
  out.epoch = epoch;
  auto add = [&](const GaussianMixture& mix, double a) {
    if (a < 0.0) throw ContractError("federated_posterior: negative weight");
    out.mixture.total_points += mix.total_points;
    if (a == 0.0) return;
    for (const auto& c : mix.components) {
      GaussianComponent scaled = c;
      scaled.weight = c.weight * a;
      out.mixture.components.push_back(scaled);
    }
  };
  add(own, alpha[0]);
  for (std::size_t h = 0; h < received.size(); ++h) add(received[h], alpha[h + 1]);

  double wsum = 0.0;
  for (const auto& c : out.mixture.components) wsum += c.weight;
  if (wsum > 0.0 && wsum != 1.0) {
    for (auto& c : out.mixture.components) c.weight /= wsum;
  }
  std::int64_t q = 0;
  for (const auto& c : out.mixture.components) q += c.point_count;
  // Zero-weight members drop their components; keep the count sum consistent.
  out.mixture.total_points = out.mixture.components.empty() ? 0 : q;
  out.grid = eval_on_grid(out.mixture, spec);
  return out;
}

ReconstructedScene reconstruct_scene(const DensityGrid& grid, double tau, Epoch epoch) {
  if (!(tau > 0.0 && tau < 1.0)) throw ContractError("reconstruct_scene: tau must be in (0, 1)");
  ReconstructedScene scene;
  scene.spec = grid.spec;
  scene.tau = tau;
  scene.epoch = epoch;
  scene.degenerate = grid.is_flat();
  const double peak = grid.max();
  if (!(peak > 0.0)) return scene;
  for (std::size_t i = 0; i < grid.mass.size(); ++i) {
    if (grid.mass[i] / peak > tau) {
      scene.cells.push_back(i);
      scene.points.push_back(grid.spec.center(i));
    }
  }
  return scene;
}

ReconstructedScene reconstruct_scene(const Posterior& posterior, double tau) {
  return reconstruct_scene(posterior.grid, tau, posterior.epoch);
}

TargetEstimates extract_targets(const DensityGrid& grid, double tau, double min_separation,
                                Epoch epoch) {
  TargetEstimates out;
  out.epoch = epoch;
  if (grid.mass.empty() || grid.is_flat()) return out;
  const double peak = grid.max();
  if (!(peak > 0.0)) return out;
  const int nx = grid.spec.nx;
  const int ny = grid.spec.ny;
  std::vector<std::size_t> candidates;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) +
                            static_cast<std::size_t>(ix);
      const double v = grid.mass[i];
      if (!(v / peak > tau)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int jx = ix + dx;
          const int jy = iy + dy;
          if (jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
          if (grid.mass[static_cast<std::size_t>(jy) * static_cast<std::size_t>(nx) +
                        static_cast<std::size_t>(jx)] > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back(i);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return grid.mass[a] > grid.mass[b];
  });
  const double sep2 = min_separation * min_separation;
  for (std::size_t i : candidates) {
    const Vec2 p = grid.spec.center(i);
    bool far = true;
    for (const auto& q : out.positions) {
      if ((p - q).squaredNorm() < sep2) {
        far = false;
        break;
      }
    }
    if (far) out.positions.push_back(p);
  }
  return out;
}

TargetEstimates extract_targets(const Posterior& posterior, double tau, double min_separation) {
  return extract_targets(posterior.grid, tau, min_separation, posterior.epoch);
}

}  // namespace radfed
