#include <cmath>

#include "roughvol/simd.hpp"

namespace roughvol::simd {
namespace {

void complex_multiply(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1];
    const double br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

void correlate(const double* dw, const double* dz, double rho, double rho_bar, double* out,
               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = rho * dw[i] + rho_bar * dz[i];
}

double ou_decay_step_dot(double* state, const double* decay, double increment,
                         const double* weights, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state[i] = decay[i] * (state[i] + increment);
    acc += weights[i] * state[i];
  }
  return acc;
}

double ou_euler_step_dot(double* state, const double* rate_dt, double increment,
                         const double* weights, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state[i] += increment - rate_dt[i] * state[i];
    acc += weights[i] * state[i];
  }
  return acc;
}

void log_price_increments(const double* variance, const double* dw, double dt, double* out,
                          std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    out[j] = std::sqrt(variance[j]) * dw[j] - 0.5 * variance[j] * dt;
}

void scale(double* x, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= c;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::scalar,         complex_multiply,     correlate,
                                 ou_decay_step_dot,   ou_euler_step_dot,    log_price_increments,
                                 scale};
  return table;
}

}  // namespace roughvol::simd
