#pragma once

// Sum-of-exponentials approximations K^n(tau) = sum_i w_i exp(-x_i tau) of the
// power kernel tau^(H - 1/2), built either from the closed-form discretisation
// of its Laplace measure mu(dx) = x^(-1/2-H) dx / Gamma(1/2 - H) or by a
// nonlinear least-squares fit on a time grid.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace roughvol {

class ExpKernel {
 public:
  /// Pairs are sorted by speed; exactly equal speeds are merged. Throws
  /// std::invalid_argument on non-positive weights or speeds.
  ExpKernel(std::vector<double> weights, std::vector<double> speeds, double H, double T);

  std::size_t size() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& speeds() const noexcept { return speeds_; }
  double hurst() const noexcept { return H_; }
  double horizon() const noexcept { return T_; }

  double operator()(double tau) const noexcept;
  /// d^order/dtau^order K^n(tau)
  double derivative(double tau, int order) const noexcept;
  /// Copy with every weight multiplied by c > 0.
  ExpKernel scaled(double c) const;

 private:
  std::vector<double> weights_;
  std::vector<double> speeds_;
  double H_;
  double T_;
};

struct KernelErrorCert {
  double l2_error;  // measured ||K^n - K||_{L2[0,T]}
  double bound;     // C * n^(-4H/5)
  double constant;  // C
  double pi_n;      // partition width of the speed axis
  bool satisfied() const noexcept { return l2_error <= bound; }
};

struct ClosedFormKernel {
  ExpKernel kernel;
  KernelErrorCert cert;
};

/// tau^(H - 1/2); throws std::domain_error for tau <= 0.
double power_kernel(double tau, double H);

/// int_0^x_max exp(-tau x) mu(dx), a truncated Laplace transform of mu that tends to
/// tau^(H - 1/2) as x_max grows. Composite Gauss-Legendre on n_quad panels after the
/// substitution x = x_max u^(1/(1/2-H)), which removes the singularity at x = 0.
double laplace_mu(double tau, double H, double x_max, std::size_t n_quad);

/// Closed-form weights/speeds on the uniform speed partition p_i = i*pi_n together
/// with the measured L2 error and its certified bound.
ClosedFormKernel closed_form_kernel(std::size_t n, double H, double T);

/// Partition width pi_n = (n^(-1/5) / T) * (sqrt(10)(1/2-H)/(5/2-H))^(2/5).
double closed_form_partition_width(std::size_t n, double H, double T);
/// C such that ||K^n - K||_{2,T} <= C n^(-4H/5).
double closed_form_bound_constant(double H, double T);

/// sqrt(int_0^T (K^n(tau) - scale * tau^(H-1/2))^2 dtau). The substitution
/// tau = T u^(1/(2H)) grades the mesh towards the singularity; n_quad panels of
/// 8-point Gauss-Legendre are used on u in [0, 1].
double kernel_l2_error(const ExpKernel& k, double H, double T, std::size_t n_quad,
                       double scale = 1.0);

/// Least-squares target sqrt(2 alpha + 1) tau^alpha, alpha = H - 1/2.
double volterra_kernel(double tau, double H);

/// Fit grid tau_j = j T / N_grid, j = 1..N_grid-1.
std::vector<double> fit_grid(double T, std::size_t N_grid);

/// Root-mean-square misfit of k against the Volterra kernel on the fit grid.
double grid_rmse(const ExpKernel& k, double H, double T, std::size_t N_grid);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-10;
  /// Weight of an L2 penalty on (0, tau_1] below the first grid lag. Without it a
  /// fit can hide large, fast terms between grid points. 0 disables it.
  double subgrid_weight = 0.0;
};

struct KernelFit {
  ExpKernel kernel;
  double rmse;
  int iterations;
  double gradient_norm;
};

/// Thrown when the fit fails to converge; carries the best iterate.
class FitFailure : public std::runtime_error {
 public:
  FitFailure(const std::string& what, KernelFit best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const KernelFit& best() const noexcept { return best_; }

 private:
  KernelFit best_;
};

/// Starting point for fit_kernel_ls: the closed-form moment construction on a
/// geometric speed partition of [0.1/T, 50 N_grid / T], scaled by sqrt(2a+1).
ExpKernel initial_kernel_guess(double H, double T, std::size_t N_grid, std::size_t n);

/// Levenberg-Marquardt (damped Gauss-Newton) on log-weights and log-speeds with
/// an analytic Jacobian. Accepted steps never increase the objective.
KernelFit fit_kernel_ls(double H, double T, std::size_t N_grid, std::size_t n,
                        const ExpKernel& init, const FitOptions& options = {});

}  // namespace roughvol
