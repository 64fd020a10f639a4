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

// Slow, direct reimplementations used as test oracles. None of them calls
// into the kernels or the code under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/LU>

#include "radfed/dbscan.hpp"
#include "radfed/grid.hpp"
#include "radfed/mixture.hpp"

namespace oracle {

using radfed::Vec2;
using radfed::Vec3;

// Density reachability by exhaustive pairwise distances and a flood fill.
inline radfed::ClusterResult dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if ((pts[i] - pts[j]).squaredNorm() <= eps * eps) nbr[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = static_cast<int>(nbr[i].size()) >= min_pts;

  radfed::ClusterResult out;
  out.labels.assign(n, radfed::kOutlier);
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || out.labels[seed] != radfed::kOutlier) continue;
    const int id = out.n_clusters++;
    std::vector<std::size_t> stack{seed};
    out.labels[seed] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j : nbr[i]) {
        if (core[j] && out.labels[j] == radfed::kOutlier) {
          out.labels[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t j : nbr[i]) {  // ascending, so the first core neighbor wins
      if (core[j]) {
        out.labels[i] = out.labels[j];
        break;
      }
    }
  }
  return out;
}

// Every cell is checked against every other cell's value and position.
inline std::vector<Vec2> extract_targets(const radfed::DensityGrid& g, double tau,
                                         double min_sep) {
  const auto& s = g.spec;
  double peak = 0.0;
  double low = g.mass[0];
  for (double v : g.mass) {
    peak = std::max(peak, v);
    low = std::min(low, v);
  }
  if (peak <= 0.0 || peak == low) return {};
  std::vector<std::size_t> cand;
  for (int iy = 0; iy < s.ny; ++iy) {
    for (int ix = 0; ix < s.nx; ++ix) {
      const std::size_t c = static_cast<std::size_t>(iy) * s.nx + ix;
      if (!(g.mass[c] / peak > tau)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = ix + dx, jy = iy + dy;
          if ((dx == 0 && dy == 0) || jx < 0 || jy < 0 || jx >= s.nx || jy >= s.ny) continue;
          if (g.mass[static_cast<std::size_t>(jy) * s.nx + jx] > g.mass[c]) is_max = false;
        }
      }
      if (is_max) cand.push_back(c);
    }
  }
  // Selection sort by (value desc, index asc).
  std::vector<Vec2> out;
  std::vector<bool> used(cand.size());
  for (std::size_t round = 0; round < cand.size(); ++round) {
    std::size_t best = cand.size();
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (used[i]) continue;
      if (best == cand.size() || g.mass[cand[i]] > g.mass[cand[best]] ||
          (g.mass[cand[i]] == g.mass[cand[best]] && cand[i] < cand[best])) {
        best = i;
      }
    }
    used[best] = true;
    const Vec2 p = s.center(cand[best]);
    bool far = true;
    for (const auto& q : out) far = far && (p - q).norm() >= min_sep;
    if (far) out.push_back(p);
  }
  return out;
}

// D(N(m0, S0) || N(m1, S1)) in two dimensions.
inline double gaussian_kl_2d(const Vec2& m0, const Eigen::Matrix2d& s0, const Vec2& m1,
                             const Eigen::Matrix2d& s1) {
  const Eigen::Matrix2d inv1 = s1.inverse();
  const Vec2 d = m1 - m0;
  return 0.5 * ((inv1 * s0).trace() + d.dot(inv1 * d) - 2.0 +
                std::log(s1.determinant() / s0.determinant()));
}

// Mixture (x, y) marginal at cell centers times cell area, then normalized.
inline radfed::DensityGrid mixture_grid(const radfed::GaussianMixture& m,
                                        const radfed::GridSpec& spec) {
  radfed::DensityGrid g = radfed::DensityGrid::zeros(spec);
  for (std::size_t c = 0; c < spec.cells(); ++c) {
    const Vec2 p = spec.center(c);
    double v = 0.0;
    for (const auto& comp : m.components) {
      const Eigen::Matrix2d s = comp.covariance.topLeftCorner<2, 2>();
      const Vec2 d = p - comp.mean.head<2>();
      v += comp.weight * std::exp(-0.5 * d.dot(s.inverse() * d)) /
           (2.0 * std::numbers::pi * std::sqrt(s.determinant()));
    }
    g.mass[c] = v * spec.cell_area();
  }
  double total = 0.0;
  for (double v : g.mass) total += v;
  for (double& v : g.mass) v /= total;
  return g;
}

}  // namespace oracle
