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
 * \file kernels.hpp
 * \brief Data-parallel inner loops with a scalar reference and SIMD variants.
 *
 * Every variant implements the same table of function pointers. The scalar
 * table is the reference; SIMD tables are checked against it by the
 * equivalence tests. `active()` picks the widest variant the running CPU
 * supports. Setting RADFED_KERNELS=scalar (or avx2) in the environment
 * overrides the choice.
 */
#pragma once

#include <cstddef>
#include <cstdint>

namespace radfed::kernels {

/// Bivariate Gaussian term: scale * exp(-0.5 * [dx dy] P [dx dy]^T), P = [[a b] [b c]].
struct Gauss2 {
  double mx = 0.0, my = 0.0;
  double a = 1.0, b = 0.0, c = 1.0;
  double scale = 1.0;
};

/// Trivariate Gaussian log-density: log_norm - 0.5 * d^T P d with P symmetric.
struct Gauss3 {
  double mx = 0.0, my = 0.0, mz = 0.0;
  double pxx = 1.0, pxy = 0.0, pxz = 0.0, pyy = 1.0, pyz = 0.0, pzz = 1.0;
  double log_norm = 0.0;
};

struct WeightedSums {
  double w = 0.0, wx = 0.0, wy = 0.0, wz = 0.0;
};

struct Scatter {
  double xx = 0.0, xy = 0.0, xz = 0.0, yy = 0.0, yz = 0.0, zz = 0.0;
};

struct KernelTable {
  const char* name;

  // out[i] += g(xs[i], ys[i])
  void (*gauss2_accumulate)(const double* xs, const double* ys, std::size_t n,
                            const Gauss2& g, double* out);

  // out[i] = log N3(p_i)
  void (*gauss3_logpdf)(const double* xs, const double* ys, const double* zs,
                        std::size_t n, const Gauss3& g, double* out);

  // logp holds m rows of n log-terms. Each column is replaced by its softmax
  // (the responsibilities) and loglik[i] receives log-sum-exp of column i.
  void (*softmax_columns)(double* logp, std::size_t m, std::size_t n,
                          double* loglik);

  // Sums of r[i]*w[i] and r[i]*w[i]*p_i. w may be null (all ones).
  WeightedSums (*weighted_sums)(const double* xs, const double* ys,
                                const double* zs, const double* r,
                                const double* w, std::size_t n);

  // Sum of r[i]*w[i]*(p_i - m)(p_i - m)^T, upper triangle.
  Scatter (*weighted_scatter)(const double* xs, const double* ys,
                              const double* zs, const double* r,
                              const double* w, std::size_t n, double mx,
                              double my, double mz);

  // Writes ascending indices i with |p_i - q|^2 <= r2; returns the count.
  std::size_t (*within_radius)(const double* xs, const double* ys,
                               const double* zs, std::size_t n, double qx,
                               double qy, double qz, double r2,
                               std::uint32_t* idx);

  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  void (*scale)(double* x, std::size_t n, double s);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // Sum of max(x, floor).
  double (*floored_sum)(const double* x, std::size_t n, double floor);
  // Sum of p' ln(p'/q') with p' = max(p, floor) * inv_sp, q' = max(q, floor) * inv_sq.
  double (*kl_terms)(const double* p, const double* q, std::size_t n,
                     double floor, double inv_sp, double inv_sq);
};

const KernelTable& scalar();

/// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2();

/// Variant used by the library; resolved once on first call.
const KernelTable& active();

}  // namespace radfed::kernels
