#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64 builds, an AVX2/FMA version; the table is chosen once at runtime
// from cpuid. Set ROUGHVOL_SIMD=scalar to force the reference kernels.
//
// Vector kernels may reassociate sums, so results agree with the scalar
// reference to rounding, not bit-for-bit.

#include <cstddef>
#include <string_view>

namespace roughvol::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  /// out[i] = a[i] * b[i] for interleaved (re, im) complex arrays of n values.
  /// out may alias a.
  void (*complex_multiply)(const double* a, const double* b, double* out, std::size_t n);

  /// out[i] = rho * dw[i] + rho_bar * dz[i]
  void (*correlate)(const double* dw, const double* dz, double rho, double rho_bar, double* out,
                    std::size_t n);

  /// state[i] = decay[i] * (state[i] + increment); returns sum_i weights[i] * state[i].
  double (*ou_decay_step_dot)(double* state, const double* decay, double increment,
                              const double* weights, std::size_t n);

  /// state[i] += increment - rate_dt[i] * state[i]; returns sum_i weights[i] * state[i].
  double (*ou_euler_step_dot)(double* state, const double* rate_dt, double increment,
                              const double* weights, std::size_t n);

  /// out[j] = sqrt(variance[j]) * dw[j] - 0.5 * variance[j] * dt
  void (*log_price_increments)(const double* variance, const double* dw, double dt, double* out,
                               std::size_t n);

  /// x[i] *= c
  void (*scale)(double* x, double c, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

/// The table selected for this process.
const KernelTable& kernels() noexcept;

}  // namespace roughvol::simd
