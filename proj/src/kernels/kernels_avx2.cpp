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

// AVX2 + FMA variants. Built with -mavx2 -mfma; only reached through the
// dispatcher after a CPUID check. Tails use masked loads so every lane goes
// through the same vector math.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "radfed/kernels.hpp"
#include "kernels_internal.hpp"

namespace radfed::kernels {
namespace {

inline __m256i tail_mask(std::size_t rem) {
  const __m256i lanes = _mm256_setr_epi64x(0, 1, 2, 3);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(rem)), lanes);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

// Cephes-style exp: range reduction by ln2 in two parts, Pade form on the
// remainder, exponent assembled from the integer part. Inputs below -708.39
// return 0 (no subnormals).
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.39);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(x, hi);
  x = _mm256_max_pd(x, lo);

  const __m256d fx = _mm256_round_pd(
      _mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878E-4), xx,
                               _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), xx,
                               _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  const __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  const __m256d r = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
  return _mm256_andnot_pd(under, r);
}

// Cephes-style natural log for positive normal inputs.
inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  const __m256i packed = _mm256_permutevar8x32_epi32(
      exp_bits, _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6));
  __m256d e = _mm256_sub_pd(_mm256_cvtepi32_pd(_mm256_castsi256_si128(packed)),
                            _mm256_set1_pd(1022.0));

  const __m256i mant = _mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
      _mm256_set1_epi64x(0x3FE0000000000000LL));
  const __m256d m = _mm256_castsi256_pd(mant);

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440),
                                      _CMP_LT_OQ);
  const __m256d xr = _mm256_blendv_pd(_mm256_sub_pd(m, one),
                                      _mm256_sub_pd(_mm256_add_pd(m, m), one), small);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, one));

  const __m256d z = _mm256_mul_pd(xr, xr);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.01875663804580931796E-4), xr,
                              _mm256_set1_pd(4.97494994976747001425E-1));
  p = _mm256_fmadd_pd(p, xr, _mm256_set1_pd(4.70579119878881725854E0));
  p = _mm256_fmadd_pd(p, xr, _mm256_set1_pd(1.44989225341610930846E1));
  p = _mm256_fmadd_pd(p, xr, _mm256_set1_pd(1.79368678507819816313E1));
  p = _mm256_fmadd_pd(p, xr, _mm256_set1_pd(7.70838733755885391666E0));
  __m256d q = _mm256_add_pd(xr, _mm256_set1_pd(1.12873587189167450590E1));
  q = _mm256_fmadd_pd(q, xr, _mm256_set1_pd(4.52279145837532221105E1));
  q = _mm256_fmadd_pd(q, xr, _mm256_set1_pd(8.29875266912776603211E1));
  q = _mm256_fmadd_pd(q, xr, _mm256_set1_pd(7.11544750618563894466E1));
  q = _mm256_fmadd_pd(q, xr, _mm256_set1_pd(2.31251620126765340583E1));

  __m256d y = _mm256_mul_pd(xr, _mm256_div_pd(_mm256_mul_pd(z, p), q));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d r = _mm256_add_pd(xr, y);
  r = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), r);
  return r;
}

void gauss2_accumulate_avx2(const double* xs, const double* ys, std::size_t n,
                            const Gauss2& g, double* out) {
  const __m256d mx = _mm256_set1_pd(g.mx);
  const __m256d my = _mm256_set1_pd(g.my);
  const __m256d a = _mm256_set1_pd(g.a);
  const __m256d b2 = _mm256_set1_pd(2.0 * g.b);
  const __m256d c = _mm256_set1_pd(g.c);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  const __m256d scale = _mm256_set1_pd(g.scale);
  auto body = [&](__m256d x, __m256d y) {
    const __m256d dx = _mm256_sub_pd(x, mx);
    const __m256d dy = _mm256_sub_pd(y, my);
    __m256d q = _mm256_mul_pd(_mm256_mul_pd(a, dx), dx);
    q = _mm256_fmadd_pd(_mm256_mul_pd(b2, dx), dy, q);
    q = _mm256_fmadd_pd(_mm256_mul_pd(c, dy), dy, q);
    return _mm256_mul_pd(scale, exp_pd(_mm256_mul_pd(mhalf, q)));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = body(_mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), v));
  }
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    const __m256d v = body(_mm256_maskload_pd(xs + i, mk), _mm256_maskload_pd(ys + i, mk));
    _mm256_maskstore_pd(out + i, mk, _mm256_add_pd(_mm256_maskload_pd(out + i, mk), v));
  }
}

void gauss3_logpdf_avx2(const double* xs, const double* ys, const double* zs,
                        std::size_t n, const Gauss3& g, double* out) {
  const __m256d mx = _mm256_set1_pd(g.mx), my = _mm256_set1_pd(g.my),
                mz = _mm256_set1_pd(g.mz);
  const __m256d pxx = _mm256_set1_pd(g.pxx), pyy = _mm256_set1_pd(g.pyy),
                pzz = _mm256_set1_pd(g.pzz);
  const __m256d pxy2 = _mm256_set1_pd(2.0 * g.pxy), pxz2 = _mm256_set1_pd(2.0 * g.pxz),
                pyz2 = _mm256_set1_pd(2.0 * g.pyz);
  const __m256d ln = _mm256_set1_pd(g.log_norm);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  auto body = [&](__m256d x, __m256d y, __m256d z) {
    const __m256d dx = _mm256_sub_pd(x, mx);
    const __m256d dy = _mm256_sub_pd(y, my);
    const __m256d dz = _mm256_sub_pd(z, mz);
    __m256d q = _mm256_mul_pd(_mm256_mul_pd(pxx, dx), dx);
    q = _mm256_fmadd_pd(_mm256_mul_pd(pyy, dy), dy, q);
    q = _mm256_fmadd_pd(_mm256_mul_pd(pzz, dz), dz, q);
    q = _mm256_fmadd_pd(_mm256_mul_pd(pxy2, dx), dy, q);
    q = _mm256_fmadd_pd(_mm256_mul_pd(pxz2, dx), dz, q);
    q = _mm256_fmadd_pd(_mm256_mul_pd(pyz2, dy), dz, q);
    return _mm256_fmadd_pd(mhalf, q, ln);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, body(_mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i),
                                   _mm256_loadu_pd(zs + i)));
  }
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    _mm256_maskstore_pd(out + i, mk,
                        body(_mm256_maskload_pd(xs + i, mk), _mm256_maskload_pd(ys + i, mk),
                             _mm256_maskload_pd(zs + i, mk)));
  }
}

void softmax_columns_avx2(double* logp, std::size_t m, std::size_t n,
                          double* loglik) {
  const __m256d neg_inf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  const __m256d one = _mm256_set1_pd(1.0);
  auto block = [&](std::size_t i, __m256i mk, bool full) {
    auto load = [&](const double* p) {
      return full ? _mm256_loadu_pd(p) : _mm256_maskload_pd(p, mk);
    };
    auto store = [&](double* p, __m256d v) {
      if (full) _mm256_storeu_pd(p, v); else _mm256_maskstore_pd(p, mk, v);
    };
    __m256d mx = neg_inf;
    for (std::size_t j = 0; j < m; ++j) mx = _mm256_max_pd(mx, load(logp + j * n + i));
    const __m256d dead = _mm256_cmp_pd(mx, neg_inf, _CMP_EQ_OQ);
    const __m256d safe_mx = _mm256_blendv_pd(mx, _mm256_setzero_pd(), dead);
    __m256d s = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d e = exp_pd(_mm256_sub_pd(load(logp + j * n + i), safe_mx));
      store(logp + j * n + i, e);
      s = _mm256_add_pd(s, e);
    }
    const __m256d uniform = _mm256_set1_pd(1.0 / static_cast<double>(m));
    const __m256d safe_s = _mm256_blendv_pd(s, one, dead);
    const __m256d inv = _mm256_div_pd(one, safe_s);
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d r = _mm256_mul_pd(load(logp + j * n + i), inv);
      store(logp + j * n + i, _mm256_blendv_pd(r, uniform, dead));
    }
    const __m256d ll = _mm256_add_pd(safe_mx, log_pd(safe_s));
    store(loglik + i, _mm256_blendv_pd(ll, neg_inf, dead));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) block(i, _mm256_setzero_si256(), true);
  if (i < n) block(i, tail_mask(n - i), false);
}

WeightedSums weighted_sums_avx2(const double* xs, const double* ys,
                                const double* zs, const double* r,
                                const double* w, std::size_t n) {
  __m256d sw = _mm256_setzero_pd(), sx = sw, sy = sw, sz = sw;
  auto body = [&](__m256d wi, __m256d x, __m256d y, __m256d z) {
    sw = _mm256_add_pd(sw, wi);
    sx = _mm256_fmadd_pd(wi, x, sx);
    sy = _mm256_fmadd_pd(wi, y, sy);
    sz = _mm256_fmadd_pd(wi, z, sz);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wi = _mm256_loadu_pd(r + i);
    if (w) wi = _mm256_mul_pd(wi, _mm256_loadu_pd(w + i));
    body(wi, _mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i), _mm256_loadu_pd(zs + i));
  }
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    __m256d wi = _mm256_maskload_pd(r + i, mk);
    if (w) wi = _mm256_mul_pd(wi, _mm256_maskload_pd(w + i, mk));
    body(wi, _mm256_maskload_pd(xs + i, mk), _mm256_maskload_pd(ys + i, mk),
         _mm256_maskload_pd(zs + i, mk));
  }
  return {hsum(sw), hsum(sx), hsum(sy), hsum(sz)};
}

Scatter weighted_scatter_avx2(const double* xs, const double* ys,
                              const double* zs, const double* r,
                              const double* w, std::size_t n, double mx,
                              double my, double mz) {
  const __m256d vmx = _mm256_set1_pd(mx), vmy = _mm256_set1_pd(my),
                vmz = _mm256_set1_pd(mz);
  __m256d xx = _mm256_setzero_pd(), xy = xx, xz = xx, yy = xx, yz = xx, zz = xx;
  auto body = [&](__m256d wi, __m256d x, __m256d y, __m256d z) {
    const __m256d dx = _mm256_sub_pd(x, vmx);
    const __m256d dy = _mm256_sub_pd(y, vmy);
    const __m256d dz = _mm256_sub_pd(z, vmz);
    const __m256d wdx = _mm256_mul_pd(wi, dx);
    const __m256d wdy = _mm256_mul_pd(wi, dy);
    xx = _mm256_fmadd_pd(wdx, dx, xx);
    xy = _mm256_fmadd_pd(wdx, dy, xy);
    xz = _mm256_fmadd_pd(wdx, dz, xz);
    yy = _mm256_fmadd_pd(wdy, dy, yy);
    yz = _mm256_fmadd_pd(wdy, dz, yz);
    zz = _mm256_fmadd_pd(_mm256_mul_pd(wi, dz), dz, zz);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wi = _mm256_loadu_pd(r + i);
    if (w) wi = _mm256_mul_pd(wi, _mm256_loadu_pd(w + i));
    body(wi, _mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i), _mm256_loadu_pd(zs + i));
  }
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    __m256d wi = _mm256_maskload_pd(r + i, mk);
    if (w) wi = _mm256_mul_pd(wi, _mm256_maskload_pd(w + i, mk));
    body(wi, _mm256_maskload_pd(xs + i, mk), _mm256_maskload_pd(ys + i, mk),
         _mm256_maskload_pd(zs + i, mk));
  }
  return {hsum(xx), hsum(xy), hsum(xz), hsum(yy), hsum(yz), hsum(zz)};
}

// Same operation order as the scalar kernel and no FMA, so the selected index
// sets match it exactly.
std::size_t within_radius_avx2(const double* xs, const double* ys,
                               const double* zs, std::size_t n, double qx,
                               double qy, double qz, double r2,
                               std::uint32_t* idx) {
  const __m256d vqx = _mm256_set1_pd(qx), vqy = _mm256_set1_pd(qy),
                vqz = _mm256_set1_pd(qz), vr2 = _mm256_set1_pd(r2);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vqz);
    const __m256d d2 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
        _mm256_mul_pd(dz, dz));
    int bits = _mm256_movemask_pd(_mm256_cmp_pd(d2, vr2, _CMP_LE_OQ));
    while (bits) {
      const int lane = __builtin_ctz(static_cast<unsigned>(bits));
      idx[count++] = static_cast<std::uint32_t>(i + static_cast<std::size_t>(lane));
      bits &= bits - 1;
    }
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    const double d2 = (dx * dx + dy * dy) + dz * dz;
    if (d2 <= r2) idx[count++] = static_cast<std::uint32_t>(i);
  }
  return count;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, _mm256_loadu_pd(x + i));
  if (i < n) s = _mm256_add_pd(s, _mm256_maskload_pd(x + i, tail_mask(n - i)));
  return hsum(s);
}

double max_avx2(const double* x, std::size_t n) {
  const __m256d neg_inf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256d m = neg_inf;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(x + i));
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    const __m256d v = _mm256_blendv_pd(neg_inf, _mm256_maskload_pd(x + i, mk),
                                       _mm256_castsi256_pd(mk));
    m = _mm256_max_pd(m, v);
  }
  return hmax(m);
}

void scale_avx2(double* x, std::size_t n, double s) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vs));
  for (; i < n; ++i) x[i] *= s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

double floored_sum_avx2(const double* x, std::size_t n, double floor) {
  const __m256d vf = _mm256_set1_pd(floor);
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, _mm256_max_pd(_mm256_loadu_pd(x + i), vf));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] > floor ? x[i] : floor;
  return hsum(s) + tail;
}

double kl_terms_avx2(const double* p, const double* q, std::size_t n,
                     double floor, double inv_sp, double inv_sq) {
  const __m256d vf = _mm256_set1_pd(floor);
  const __m256d vsp = _mm256_set1_pd(inv_sp), vsq = _mm256_set1_pd(inv_sq);
  __m256d s = _mm256_setzero_pd();
  auto body = [&](__m256d pv, __m256d qv) {
    const __m256d pp = _mm256_mul_pd(_mm256_max_pd(pv, vf), vsp);
    const __m256d qq = _mm256_mul_pd(_mm256_max_pd(qv, vf), vsq);
    return _mm256_mul_pd(pp, log_pd(_mm256_div_pd(pp, qq)));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, body(_mm256_loadu_pd(p + i), _mm256_loadu_pd(q + i)));
  if (i < n) {
    const __m256i mk = tail_mask(n - i);
    // Masked lanes load 0 and get floored; drop their terms.
    const __m256d t = body(_mm256_maskload_pd(p + i, mk), _mm256_maskload_pd(q + i, mk));
    s = _mm256_add_pd(s, _mm256_and_pd(t, _mm256_castsi256_pd(mk)));
  }
  return hsum(s);
}

}  // namespace

namespace detail {

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2",
      gauss2_accumulate_avx2,
      gauss3_logpdf_avx2,
      softmax_columns_avx2,
      weighted_sums_avx2,
      weighted_scatter_avx2,
      within_radius_avx2,
      sum_avx2,
      max_avx2,
      scale_avx2,
      axpy_avx2,
      floored_sum_avx2,
      kl_terms_avx2,
  };
  return table;
}

}  // namespace detail
}  // namespace radfed::kernels
