// AVX2/FMA variants. This file is compiled with -mavx2 -mfma and is only
// reached through the dispatch table after a CPU feature check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "topopt/kernels.hpp"

namespace topopt::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void element_density(const double* z, const std::int32_t* conn, std::size_t n_elem,
                     double* out) {
  const __m128i stride4 = _mm_setr_epi32(0, 4, 8, 12);
  const __m256d quarter = _mm256_set1_pd(0.25);
  std::size_t e = 0;
  for (; e + 4 <= n_elem; e += 4) {
    const int* base = reinterpret_cast<const int*>(conn + 4 * e);
    __m256d sum = _mm256_i32gather_pd(z, _mm_i32gather_epi32(base, stride4, 4), 8);
    for (int r = 1; r < 4; ++r) {
      const __m128i idx = _mm_i32gather_epi32(base + r, stride4, 4);
      sum = _mm256_add_pd(sum, _mm256_i32gather_pd(z, idx, 8));
    }
    _mm256_storeu_pd(out + e, _mm256_mul_pd(quarter, sum));
  }
  for (; e < n_elem; ++e) {
    const std::int32_t* c = conn + 4 * e;
    out[e] = 0.25 * (((z[c[0]] + z[c[1]]) + z[c[2]]) + z[c[3]]);
  }
}

void element_energy(const double* u, const double* w, const std::int32_t* dofs,
                    const double* k, const double* scale, std::size_t n_elem, double* out) {
  const __m128i stride8 = _mm_setr_epi32(0, 8, 16, 24);
  std::size_t e = 0;
  for (; e + 4 <= n_elem; e += 4) {
    const int* base = reinterpret_cast<const int*>(dofs + 8 * e);
    __m256d ue[8];
    __m256d we[8];
    for (int r = 0; r < 8; ++r) {
      const __m128i idx = _mm_i32gather_epi32(base + r, stride8, 4);
      ue[r] = _mm256_i32gather_pd(u, idx, 8);
      we[r] = _mm256_i32gather_pd(w, idx, 8);
    }
    __m256d acc = _mm256_setzero_pd();
    for (int r = 0; r < 8; ++r) {
      __m256d kw = _mm256_setzero_pd();
      for (int c = 0; c < 8; ++c) {
        kw = _mm256_fmadd_pd(_mm256_set1_pd(k[8 * r + c]), we[c], kw);
      }
      acc = _mm256_fmadd_pd(ue[r], kw, acc);
    }
    _mm256_storeu_pd(out + e, _mm256_mul_pd(_mm256_loadu_pd(scale + e), acc));
  }
  for (; e < n_elem; ++e) {
    const std::int32_t* d = dofs + 8 * e;
    double acc = 0.0;
    for (int r = 0; r < 8; ++r) {
      double kw = 0.0;
      for (int c = 0; c < 8; ++c) {
        kw = std::fma(k[8 * r + c], w[d[c]], kw);
      }
      acc = std::fma(u[d[r]], kw, acc);
    }
    out[e] = scale[e] * acc;
  }
}

void clamp(const double* x, const double* lo, const double* hi, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // max/min operand order matches std::max(lo, x) and std::min(., hi) for NaN-free input.
    const __m256d v = _mm256_max_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(lo + i));
    _mm256_storeu_pd(out + i, _mm256_min_pd(v, _mm256_loadu_pd(hi + i)));
  }
  for (; i < n; ++i) {
    out[i] = std::min(std::max(lo[i], x[i]), hi[i]);
  }
}

void reciprocal_diag(const double* g, const double* z, double floor, bool absolute,
                     std::size_t n, double* out) {
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d vfloor = _mm256_set1_pd(floor);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d h = _mm256_div_pd(_mm256_mul_pd(two, _mm256_loadu_pd(g + i)), _mm256_loadu_pd(z + i));
    if (absolute) {
      h = _mm256_andnot_pd(sign_mask, h);
    }
    _mm256_storeu_pd(out + i, _mm256_max_pd(h, vfloor));
  }
  for (; i < n; ++i) {
    double h = 2.0 * g[i] / z[i];
    if (absolute) {
      h = std::fabs(h);
    }
    out[i] = std::max(h, floor);
  }
}

double discreteness_sum(const double* rho, double delta, std::size_t n) {
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vdelta = _mm256_set1_pd(delta);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(rho + i);
    const __m256d t = _mm256_mul_pd(_mm256_mul_pd(four, _mm256_sub_pd(r, vdelta)), _mm256_sub_pd(one, r));
    acc = _mm256_add_pd(acc, t);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    sum += 4.0 * (rho[i] - delta) * (1.0 - rho[i]);
  }
  return sum;
}

double projected_residual_sq(const double* z, const double* g, double lo, double hi,
                             std::size_t n) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d zi = _mm256_loadu_pd(z + i);
    const __m256d step = _mm256_sub_pd(zi, _mm256_loadu_pd(g + i));
    const __m256d r = _mm256_sub_pd(_mm256_min_pd(_mm256_max_pd(step, vlo), vhi), zi);
    acc = _mm256_fmadd_pd(r, r, acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    const double r = std::min(std::max(lo, z[i] - g[i]), hi) - z[i];
    sum += r * r;
  }
  return sum;
}

}  // namespace

namespace detail {
const KernelTable avx2_table{Backend::avx2,    element_density,  element_energy,       clamp,
                             reciprocal_diag, discreteness_sum, projected_residual_sq};
}  // namespace detail

}  // namespace topopt::kernels
