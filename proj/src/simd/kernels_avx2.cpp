// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher.

#include <immintrin.h>

#include <cmath>

#include "roughvol/simd.hpp"

namespace roughvol::simd {
namespace {

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

void complex_multiply(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(a + 2 * i);
    const __m256d vb = _mm256_loadu_pd(b + 2 * i);
    const __m256d b_re = _mm256_movedup_pd(vb);
    const __m256d b_im = _mm256_permute_pd(vb, 0xF);
    const __m256d a_swap = _mm256_permute_pd(va, 0x5);
    _mm256_storeu_pd(out + 2 * i, _mm256_fmaddsub_pd(va, b_re, _mm256_mul_pd(a_swap, b_im)));
  }
  for (; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1];
    const double br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

void correlate(const double* dw, const double* dz, double rho, double rho_bar, double* out,
               std::size_t n) {
  const __m256d r = _mm256_set1_pd(rho);
  const __m256d rb = _mm256_set1_pd(rho_bar);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w = _mm256_loadu_pd(dw + i);
    const __m256d z = _mm256_loadu_pd(dz + i);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(r, w, _mm256_mul_pd(rb, z)));
  }
  for (; i < n; ++i) out[i] = rho * dw[i] + rho_bar * dz[i];
}

double ou_decay_step_dot(double* state, const double* decay, double increment,
                         const double* weights, std::size_t n) {
  const __m256d inc = _mm256_set1_pd(increment);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d y = _mm256_mul_pd(_mm256_loadu_pd(decay + i),
                                    _mm256_add_pd(_mm256_loadu_pd(state + i), inc));
    _mm256_storeu_pd(state + i, y);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(weights + i), y, acc);
  }
  double sum = horizontal_sum(acc);
  for (; i < n; ++i) {
    state[i] = decay[i] * (state[i] + increment);
    sum += weights[i] * state[i];
  }
  return sum;
}

double ou_euler_step_dot(double* state, const double* rate_dt, double increment,
                         const double* weights, std::size_t n) {
  const __m256d inc = _mm256_set1_pd(increment);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d y0 = _mm256_loadu_pd(state + i);
    const __m256d y = _mm256_fnmadd_pd(_mm256_loadu_pd(rate_dt + i), y0, _mm256_add_pd(y0, inc));
    _mm256_storeu_pd(state + i, y);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(weights + i), y, acc);
  }
  double sum = horizontal_sum(acc);
  for (; i < n; ++i) {
    state[i] += increment - rate_dt[i] * state[i];
    sum += weights[i] * state[i];
  }
  return sum;
}

void log_price_increments(const double* variance, const double* dw, double dt, double* out,
                          std::size_t n) {
  const __m256d half_dt = _mm256_set1_pd(0.5 * dt);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d v = _mm256_loadu_pd(variance + j);
    const __m256d w = _mm256_loadu_pd(dw + j);
    _mm256_storeu_pd(out + j, _mm256_fmsub_pd(_mm256_sqrt_pd(v), w, _mm256_mul_pd(v, half_dt)));
  }
  for (; j < n; ++j) out[j] = std::sqrt(variance[j]) * dw[j] - 0.5 * variance[j] * dt;
}

void scale(double* x, double c, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vc));
  for (; i < n; ++i) x[i] *= c;
}

}  // namespace

const KernelTable& avx2_kernel_table() noexcept {
  static const KernelTable table{Isa::avx2,         complex_multiply,     correlate,
                                 ou_decay_step_dot, ou_euler_step_dot,    log_price_increments,
                                 scale};
  return table;
}

}  // namespace roughvol::simd
