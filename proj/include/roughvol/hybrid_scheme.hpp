#pragma once

// Hybrid scheme (kappa = 1) for the Volterra process
//   X(t) = sqrt(2*alpha + 1) * int_0^t (t - s)^alpha dB_s,
// with the lower-triangular Toeplitz product evaluated by FFT.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "roughvol/sim_core.hpp"

namespace roughvol {

/// b_k^* = ((k^(a+1) - (k-1)^(a+1)) / (a+1))^(1/a) for k = 2..N; element 0 is b_2^*.
std::vector<double> optimal_nodes(double alpha, std::size_t N);

/// Linear convolution out[j] = sum_{k<=j} kernel[k] * signal[j-k] for j < signal length,
/// via zero-padded real FFTs of length next_pow2(2L - 1).
///
/// The kernel spectrum is computed once. apply() is safe to call from several threads
/// provided each thread passes its own Workspace.
class ToeplitzConvolver {
 public:
  class Workspace;
  struct WorkspaceDeleter {
    void operator()(Workspace* ws) const noexcept;
  };
  /// Per-thread FFT buffers.
  using WorkspacePtr = std::unique_ptr<Workspace, WorkspaceDeleter>;

  ToeplitzConvolver(std::span<const double> kernel, std::size_t signal_length);
  ~ToeplitzConvolver();
  ToeplitzConvolver(ToeplitzConvolver&&) noexcept;
  ToeplitzConvolver& operator=(ToeplitzConvolver&&) noexcept;
  ToeplitzConvolver(const ToeplitzConvolver&) = delete;
  ToeplitzConvolver& operator=(const ToeplitzConvolver&) = delete;

  std::size_t signal_length() const noexcept;
  std::size_t fft_length() const noexcept;

  WorkspacePtr make_workspace() const;
  void apply(std::span<const double> signal, std::span<double> out, Workspace& ws) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Every row of signal convolved with kernel. Requires 1 <= kernel.size() <= signal.cols().
Matrix toeplitz_convolve(std::span<const double> kernel, const Matrix& signal);

/// Treatment of the cell next to the kernel singularity.
enum class NearField {
  exact,     // Wiener integral sampled jointly with dB
  midpoint,  // (dt/2)^a * dB, no extra randomness
};

/// Immutable, shareable simulation plan for one (grid, alpha).
class HybridPlan {
 public:
  HybridPlan(const TimeGrid& grid, double alpha, NearField near = NearField::exact);

  const TimeGrid& grid() const noexcept { return grid_; }
  double alpha() const noexcept { return alpha_; }
  NearField near_field() const noexcept { return near_; }
  /// Coefficient of the independent unit normal in each near cell (0 for midpoint).
  double near_residual() const noexcept { return near_residual_; }
  /// b_k^*, k = 2..N
  const std::vector<double>& b_star() const noexcept { return b_star_; }
  /// (b_k^* dt)^alpha, k = 2..N
  const std::vector<double>& kernel_weights() const noexcept { return kernel_weights_; }
  /// sqrt(2a+1) * [c, (b_2^* dt)^a, ..., (b_N^* dt)^a] with c = dt^a / (a+1) for the
  /// exact near cell and (dt/2)^a for the midpoint rule.
  const std::vector<double>& convolution_kernel() const noexcept { return conv_kernel_; }
  const ToeplitzConvolver& convolver() const noexcept { return *convolver_; }

  /// One path: dB and near have N entries, out has N+1 entries with out[0] = 0.
  /// near (unit normals) is ignored by the midpoint rule and may then be empty.
  void simulate_path(std::span<const double> dB, std::span<const double> near,
                     std::span<double> out, ToeplitzConvolver::Workspace& ws) const;

 private:
  TimeGrid grid_;
  double alpha_;
  NearField near_;
  double near_residual_ = 0.0;
  std::vector<double> b_star_;
  std::vector<double> kernel_weights_;
  std::vector<double> conv_kernel_;
  std::shared_ptr<const ToeplitzConvolver> convolver_;
};

struct VolterraPaths {
  Matrix values;  // [n_paths x (N+1)], column 0 is zero
  TimeGrid grid;
  double alpha;
};

/// Throws std::invalid_argument when inc.grid differs from plan.grid().
VolterraPaths simulate_volterra(const HybridPlan& plan, const PathIncrements& inc,
                                int threads = 1);

}  // namespace roughvol
