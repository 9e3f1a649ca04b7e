#pragma once

// Variance and log-price paths for rBergomi (hybrid scheme) and the n-term
// aBergomi model (a superposition of Ornstein-Uhlenbeck factors), plus the
// affine conditional expectation of the Markovian variance.

#include <cstddef>
#include <span>
#include <vector>

#include "roughvol/hybrid_scheme.hpp"
#include "roughvol/kernel.hpp"
#include "roughvol/sim_core.hpp"

namespace roughvol {

struct VariancePaths {
  Matrix values;  // [n_paths x (N+1)], column 0 equals xi0
  TimeGrid grid;
  ModelParams params;
};

/// V_j = xi0 * exp(eta * X_j - eta^2/2 * t_j^(2a+1)). Throws std::invalid_argument
/// when volterra.alpha differs from params.alpha().
VariancePaths rbergomi_variance(const VolterraPaths& volterra, const ModelParams& params);

/// Euler recursion log S_{j+1} = log S_j + sqrt(V_j) dW_j - V_j dt / 2 from log S_0 = 0.
/// Returns [n_paths x (N+1)].
Matrix rbergomi_log_price(const VariancePaths& V, const PathIncrements& inc);

/// One path of the same recursion; out has N+1 entries.
void log_price_path(std::span<const double> variance, std::span<const double> dW, double dt,
                    std::span<double> out);

enum class FactorStepping {
  exponential,  // Y <- exp(-k dt) (Y + dB), exact in distribution for the lag-dt kernel
  euler,        // Y <- Y + dB - k dt Y
};

enum class MultPlacement {
  exponent,  // m multiplies the driver inside the variance exponent
  smile,     // m rescales the implied-vol smile afterwards
};

/// Square of the smile multiplication factor tabulated per step count
/// (50, 100, 150, 200). Throws std::invalid_argument for other step counts.
double table2_mult_factor_squared(std::size_t steps);

/// Truncated aBergomi setup. With r = theta/T the factors mean-revert at the
/// decay speeds k_i r, the driver is y_t = sum_i w_i exp(-k_i (1-r) t) Y^i_t and
/// sqrt(r) * y_t stands in for the Volterra process. theta = T recovers the
/// untruncated Markovian model.
struct AbergomiConfig {
  ExpKernel kernel;
  ModelParams params;
  double theta;
  double mult_factor = 1.0;
  MultPlacement placement = MultPlacement::exponent;
  bool exact_compensator = false;
  FactorStepping stepping = FactorStepping::exponential;

  /// Throws std::invalid_argument unless 0 < theta <= T and mult_factor > 0.
  void validate() const;
  /// k_i * theta / T
  std::vector<double> decay_speeds() const;
  /// k_i * (1 - theta / T)
  std::vector<double> prefactor_speeds() const;
  /// sqrt(theta / T)
  double scaling() const;
  /// m when it sits in the exponent, otherwise 1.
  double exponent_factor() const noexcept {
    return placement == MultPlacement::exponent ? mult_factor : 1.0;
  }
};

/// theta = T - dt and m = 1.
AbergomiConfig make_abergomi_config(ExpKernel kernel, const ModelParams& params,
                                    const TimeGrid& grid);

struct OUFactorState {
  double time = 0.0;
  Matrix Y;  // [n_paths x n_terms]
};

/// Factor levels at every node t_0..t_N, all starting at zero, driven by dB.
std::vector<OUFactorState> simulate_ou_factors(const AbergomiConfig& cfg,
                                               const PathIncrements& inc);

/// y paths [n_paths x (N+1)] from the factor states.
Matrix abergomi_driver(const AbergomiConfig& cfg, const std::vector<OUFactorState>& factors);

/// V = xi0 * exp(m * eta * sqrt(theta/T) * y - c(t)), where c(t) is eta^2/2 t^(2a+1)
/// or, with exact_compensator, half the variance of the exponent.
VariancePaths abergomi_variance(const AbergomiConfig& cfg, const Matrix& y, const TimeGrid& grid);

/// Immutable per-grid tables for path-at-a-time aBergomi simulation.
class AbergomiPlan {
 public:
  AbergomiPlan(const AbergomiConfig& cfg, const TimeGrid& grid);

  const AbergomiConfig& config() const noexcept { return cfg_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t terms() const noexcept { return n_; }

  /// Variance path V (N+1 entries) from dB (N entries). state needs terms() entries.
  void simulate_variance(std::span<const double> dB, std::span<double> V,
                         std::span<double> state) const;
  /// Driver y (N+1 entries) only.
  void simulate_driver(std::span<const double> dB, std::span<double> y,
                       std::span<double> state) const;

 private:
  AbergomiConfig cfg_;
  TimeGrid grid_;
  std::size_t n_;
  std::vector<double> step_coeff_;     // exp(-k dt) or k dt per factor
  std::vector<double> node_weights_;   // [(N+1) x n], w_i exp(-k_i (1-r) t_j)
  std::vector<double> compensator_;    // per node
  double exponent_scale_;
};

/// chi(s, t) = sum_ij a_i a_j exp(-(k_i+k_j)(t-s)) (1 - exp(-(k_i+k_j) s)) / (k_i+k_j).
/// Requires 0 <= s <= t.
double quadratic_variation_chi(const ExpKernel& kernel, double s, double t);

enum class AffineForm {
  exact,    // (sigma^2/2) sum_ij a_i a_j (1 - e^{-(x_i+x_j)h}) / (x_i+x_j)
  printed,  // (sigma^2/2) sum_i a_i (1 - e^{-x_i h}) / x_i
};

/// E[xi0 exp(sigma sum_i a_i Y^i_t) | Y_s] per path for unit-noise OU factors
/// dY^i = -x_i Y^i dt + dB. Requires s <= t.
std::vector<double> variance_conditional_expectation(const ExpKernel& kernel,
                                                     const OUFactorState& state, double s,
                                                     double t, double sigma, double xi0,
                                                     AffineForm form = AffineForm::exact);

/// Exact Gaussian transition of the unit-noise OU factors over a horizon h.
struct OUTransition {
  std::vector<double> decay;     // exp(-x_i h)
  std::vector<double> cholesky;  // lower factor of Cov_ij = (1 - e^{-(x_i+x_j)h})/(x_i+x_j), row-major
  std::size_t size;
};
OUTransition ou_exact_transition(const ExpKernel& kernel, double h);

}  // namespace roughvol
