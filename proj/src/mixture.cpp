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

#include "radfed/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "radfed/kernels.hpp"

namespace radfed {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

kernels::Gauss3 log_density_params(const GaussianComponent& c) {
  kernels::Gauss3 g;
  g.mx = c.mean.x();
  g.my = c.mean.y();
  g.mz = c.mean.z();
  const Eigen::LLT<Mat3> llt(c.covariance);
  const Mat3 prec = llt.solve(Mat3::Identity());
  g.pxx = prec(0, 0);
  g.pxy = 0.5 * (prec(0, 1) + prec(1, 0));
  g.pxz = 0.5 * (prec(0, 2) + prec(2, 0));
  g.pyy = prec(1, 1);
  g.pyz = 0.5 * (prec(1, 2) + prec(2, 1));
  g.pzz = prec(2, 2);
  const Mat3 l = llt.matrixL();
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
  g.log_norm = (c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity()) -
               1.5 * kLog2Pi - 0.5 * log_det;
  return g;
}

// Largest-remainder rounding of nonnegative shares to integers summing to total.
std::vector<std::int64_t> round_to_total(const std::vector<double>& shares, std::int64_t total) {
  std::vector<std::int64_t> out(shares.size(), 0);
  if (shares.empty()) return out;
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<double> scaled(shares.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    scaled[i] = sum > 0.0 ? shares[i] * static_cast<double>(total) / sum : 0.0;
    out[i] = static_cast<std::int64_t>(std::floor(scaled[i]));
    assigned += out[i];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scaled[a] - std::floor(scaled[a]) > scaled[b] - std::floor(scaled[b]);
  });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++out[order[k]];
    ++assigned;
  }
  return out;
}

}  // namespace

bool is_valid(const GaussianMixture& mixture, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  double wsum = 0.0;
  std::int64_t qsum = 0;
  for (std::size_t m = 0; m < mixture.components.size(); ++m) {
    const auto& c = mixture.components[m];
    const std::string tag = "component " + std::to_string(m) + ": ";
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) return fail(tag + "weight outside [0, 1]");
    if (!c.mean.allFinite() || !c.covariance.allFinite()) return fail(tag + "non-finite parameters");
    const double scale = std::max(1.0, c.covariance.cwiseAbs().maxCoeff());
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      return fail(tag + "covariance not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(c.covariance, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) return fail(tag + "covariance not positive-definite");
    if (c.point_count < 0) return fail(tag + "negative point count");
    wsum += c.weight;
    qsum += c.point_count;
  }
  if (!mixture.empty() && std::abs(wsum - 1.0) > 1e-9) return fail("weights do not sum to 1");
  if (qsum != mixture.total_points && !mixture.empty()) {
    return fail("component point counts do not sum to total_points");
  }
  if (mixture.total_points < 0) return fail("negative total_points");
  return true;
}

Mat3 floor_covariance(const Mat3& cov, double floor) {
  const Mat3 sym = 0.5 * (cov + cov.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  const Vec3 vals = eig.eigenvalues().cwiseMax(floor);
  const Mat3& vecs = eig.eigenvectors();
  Mat3 out = vecs * vals.asDiagonal() * vecs.transpose();
  return 0.5 * (out + out.transpose());
}

int choose_components(const ClusterResult& clusters, int m_max) {
  if (m_max < 1) throw ContractError("choose_components: m_max must be >= 1");
  return std::min(clusters.n_clusters, m_max);
}

EmInit init_from_clusters(std::span<const Vec3> points, const ClusterResult& clusters, int m,
                          double cov_floor) {
  EmInit init;
  if (m <= 0 || clusters.n_clusters == 0) return init;
  const auto sizes = cluster_sizes(clusters);
  std::vector<int> ids(static_cast<std::size_t>(clusters.n_clusters));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
  });
  ids.resize(static_cast<std::size_t>(std::min(m, clusters.n_clusters)));
  std::sort(ids.begin(), ids.end());

  std::size_t selected_total = 0;
  for (int id : ids) selected_total += sizes[static_cast<std::size_t>(id)];
  for (int id : ids) {
    Vec3 mean = Vec3::Zero();
    std::size_t count = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (clusters.labels[i] == id) {
        mean += points[i];
        ++count;
      }
    }
    mean /= static_cast<double>(count);
    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (clusters.labels[i] == id) {
        const Vec3 d = points[i] - mean;
        cov += d * d.transpose();
      }
    }
    cov /= static_cast<double>(count);
    init.means.push_back(mean);
    init.covariances.push_back(floor_covariance(cov, cov_floor));
    init.weights.push_back(static_cast<double>(count) / static_cast<double>(selected_total));
  }
  return init;
}

GaussianMixture fit_em(std::span<const Vec3> points, int components, const EmInit& init,
                       const EmOptions& options, std::span<const double> weights,
                       EmReport* report) {
  EmReport local_report;
  EmReport& rep = report ? *report : local_report;
  rep = EmReport{};

  GaussianMixture mixture;
  const std::size_t n = points.size();
  mixture.total_points = static_cast<std::int64_t>(n);
  if (n == 0) return mixture;
  if (components < 1) throw ContractError("fit_em: need at least one component");
  if (init.means.size() < static_cast<std::size_t>(components)) {
    throw ContractError("fit_em: fewer initial means than components");
  }
  if (!weights.empty() && weights.size() != n) {
    throw ContractError("fit_em: weights must match points");
  }
  if (static_cast<std::size_t>(components) > n) {
    components = static_cast<int>(n);
    rep.reduced_components = true;
  }
  const auto m_count = static_cast<std::size_t>(components);

  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].x();
    ys[i] = points[i].y();
    zs[i] = points[i].z();
  }
  const double* w = weights.empty() ? nullptr : weights.data();
  double total_weight = static_cast<double>(n);
  if (w) {
    total_weight = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total_weight > 0.0)) {
      w = nullptr;
      total_weight = static_cast<double>(n);
    }
  }

  const auto& k = kernels::active();
  const std::vector<double> ones(n, 1.0);

  // Fallback covariance for inits that carry none.
  Mat3 pooled_cov;
  {
    const auto s = k.weighted_sums(xs.data(), ys.data(), zs.data(), ones.data(), w, n);
    const auto sc = k.weighted_scatter(xs.data(), ys.data(), zs.data(), ones.data(), w, n,
                                       s.wx / s.w, s.wy / s.w, s.wz / s.w);
    pooled_cov << sc.xx, sc.xy, sc.xz, sc.xy, sc.yy, sc.yz, sc.xz, sc.yz, sc.zz;
    pooled_cov = floor_covariance(pooled_cov / s.w, options.cov_floor);
  }

  auto& comps = mixture.components;
  comps.resize(m_count);
  double init_wsum = 0.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    comps[m].mean = init.means[m];
    comps[m].covariance = m < init.covariances.size()
                              ? floor_covariance(init.covariances[m], options.cov_floor)
                              : pooled_cov;
    comps[m].weight = m < init.weights.size() ? init.weights[m] : 1.0;
    init_wsum += comps[m].weight;
  }
  for (auto& c : comps) c.weight = init_wsum > 0.0 ? c.weight / init_wsum : 1.0 / static_cast<double>(m_count);

  std::vector<double> resp(m_count * n);
  std::vector<double> point_ll(n);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    for (std::size_t m = 0; m < m_count; ++m) {
      k.gauss3_logpdf(xs.data(), ys.data(), zs.data(), n, log_density_params(comps[m]),
                      resp.data() + m * n);
    }
    k.softmax_columns(resp.data(), m_count, n, point_ll.data());
    double ll = 0.0;
    if (w) {
      for (std::size_t i = 0; i < n; ++i) ll += w[i] * point_ll[i];
    } else {
      ll = k.sum(point_ll.data(), n);
    }
    const double mean_ll = ll / total_weight;
    rep.loglik_trace.push_back(mean_ll);
    if (iter > 0 && mean_ll - prev_ll < options.tol) {
      rep.converged = true;
      break;
    }
    if (iter >= options.max_iters) break;
    prev_ll = mean_ll;

    // M-step.
    double nsum = 0.0;
    std::vector<double> mass(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
      const double* r = resp.data() + m * n;
      const auto s = k.weighted_sums(xs.data(), ys.data(), zs.data(), r, w, n);
      mass[m] = s.w;
      nsum += s.w;
      if (!(s.w > 1e-12 * total_weight)) continue;  // dead: keep its shape
      const Vec3 mean(s.wx / s.w, s.wy / s.w, s.wz / s.w);
      const auto sc = k.weighted_scatter(xs.data(), ys.data(), zs.data(), r, w, n, mean.x(),
                                         mean.y(), mean.z());
      Mat3 cov;
      cov << sc.xx, sc.xy, sc.xz, sc.xy, sc.yy, sc.yz, sc.xz, sc.yz, sc.zz;
      comps[m].mean = mean;
      comps[m].covariance = floor_covariance(cov / s.w, options.cov_floor);
    }
    for (std::size_t m = 0; m < m_count; ++m) {
      comps[m].weight = mass[m] > 1e-12 * total_weight ? mass[m] / nsum : 0.0;
    }
    ++rep.iterations;
  }

  // Responsibilities in `resp` belong to the returned parameters.
  std::vector<double> shares(m_count);
  for (std::size_t m = 0; m < m_count; ++m) shares[m] = k.sum(resp.data() + m * n, n);
  const auto counts = round_to_total(shares, static_cast<std::int64_t>(n));
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  for (std::size_t m = 0; m < m_count; ++m) {
    comps[m].point_count = counts[m];
    comps[m].weight /= wsum;
  }
  return mixture;
}

DensityGrid eval_on_grid(const GaussianMixture& mixture, const GridSpec& spec) {
  if (!spec.valid()) throw ContractError("eval_on_grid: invalid grid spec");
  if (mixture.empty()) return DensityGrid::uniform(spec);
  DensityGrid grid = DensityGrid::zeros(spec);
  const GridCenters& centers = grid_centers(spec);
  const auto& k = kernels::active();
  for (const auto& c : mixture.components) {
    if (!(c.weight > 0.0)) continue;
    const double a = c.covariance(0, 0);
    const double b = 0.5 * (c.covariance(0, 1) + c.covariance(1, 0));
    const double d = c.covariance(1, 1);
    const double det = a * d - b * b;
    kernels::Gauss2 g;
    g.mx = c.mean.x();
    g.my = c.mean.y();
    g.a = d / det;
    g.b = -b / det;
    g.c = a / det;
    g.scale = c.weight * spec.cell_area() / (2.0 * std::numbers::pi * std::sqrt(det));
    k.gauss2_accumulate(centers.xs.data(), centers.ys.data(), spec.cells(), g, grid.mass.data());
  }
  grid.normalize();
  return grid;
}

}  // namespace radfed
