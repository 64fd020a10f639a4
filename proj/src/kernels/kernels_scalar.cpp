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

#include "radfed/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace radfed::kernels {
namespace {

void gauss2_accumulate_scalar(const double* xs, const double* ys, std::size_t n,
                              const Gauss2& g, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - g.mx;
    const double dy = ys[i] - g.my;
    const double q = g.a * dx * dx + 2.0 * g.b * dx * dy + g.c * dy * dy;
    out[i] += g.scale * std::exp(-0.5 * q);
  }
}

void gauss3_logpdf_scalar(const double* xs, const double* ys, const double* zs,
                          std::size_t n, const Gauss3& g, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - g.mx;
    const double dy = ys[i] - g.my;
    const double dz = zs[i] - g.mz;
    const double q = g.pxx * dx * dx + g.pyy * dy * dy + g.pzz * dz * dz +
                     2.0 * (g.pxy * dx * dy + g.pxz * dx * dz + g.pyz * dy * dz);
    out[i] = g.log_norm - 0.5 * q;
  }
}

void softmax_columns_scalar(double* logp, std::size_t m, std::size_t n,
                            double* loglik) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = kNegInf;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, logp[j * n + i]);
    if (mx == kNegInf) {
      for (std::size_t j = 0; j < m; ++j) logp[j * n + i] = 1.0 / static_cast<double>(m);
      loglik[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = std::exp(logp[j * n + i] - mx);
      logp[j * n + i] = e;
      s += e;
    }
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < m; ++j) logp[j * n + i] *= inv;
    loglik[i] = mx + std::log(s);
  }
}

WeightedSums weighted_sums_scalar(const double* xs, const double* ys,
                                  const double* zs, const double* r,
                                  const double* w, std::size_t n) {
  WeightedSums s;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w ? r[i] * w[i] : r[i];
    s.w += wi;
    s.wx += wi * xs[i];
    s.wy += wi * ys[i];
    s.wz += wi * zs[i];
  }
  return s;
}

Scatter weighted_scatter_scalar(const double* xs, const double* ys,
                                const double* zs, const double* r,
                                const double* w, std::size_t n, double mx,
                                double my, double mz) {
  Scatter s;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w ? r[i] * w[i] : r[i];
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    const double dz = zs[i] - mz;
    s.xx += wi * dx * dx;
    s.xy += wi * dx * dy;
    s.xz += wi * dx * dz;
    s.yy += wi * dy * dy;
    s.yz += wi * dy * dz;
    s.zz += wi * dz * dz;
  }
  return s;
}

std::size_t within_radius_scalar(const double* xs, const double* ys,
                                 const double* zs, std::size_t n, double qx,
                                 double qy, double qz, double r2,
                                 std::uint32_t* idx) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    const double d2 = (dx * dx + dy * dy) + dz * dz;
    if (d2 <= r2) idx[count++] = static_cast<std::uint32_t>(i);
  }
  return count;
}

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double max_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void scale_scalar(double* x, std::size_t n, double s) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double floored_sum_scalar(const double* x, std::size_t n, double floor) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::max(x[i], floor);
  return s;
}

double kl_terms_scalar(const double* p, const double* q, std::size_t n,
                       double floor, double inv_sp, double inv_sq) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pp = std::max(p[i], floor) * inv_sp;
    const double qq = std::max(q[i], floor) * inv_sq;
    s += pp * std::log(pp / qq);
  }
  return s;
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{
      "scalar",
      gauss2_accumulate_scalar,
      gauss3_logpdf_scalar,
      softmax_columns_scalar,
      weighted_sums_scalar,
      weighted_scatter_scalar,
      within_radius_scalar,
      sum_scalar,
      max_scalar,
      scale_scalar,
      axpy_scalar,
      floored_sum_scalar,
      kl_terms_scalar,
  };
  return table;
}

}  // namespace radfed::kernels
