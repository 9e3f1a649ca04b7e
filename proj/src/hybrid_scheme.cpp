#include "roughvol/hybrid_scheme.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "roughvol/parallel.hpp"
#include "roughvol/simd.hpp"

namespace roughvol {

namespace {

// The FFTW planner is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

}  // namespace

std::vector<double> optimal_nodes(double alpha, std::size_t N) {
  if (!(alpha > -0.5 && alpha < 0.0))
    throw std::invalid_argument("optimal_nodes: alpha must lie in (-1/2, 0)");
  if (N < 2) throw std::invalid_argument("optimal_nodes: N must be at least 2");
  const double a1 = alpha + 1.0;
  std::vector<double> b(N - 1);
  for (std::size_t k = 2; k <= N; ++k) {
    const double kd = static_cast<double>(k);
    // k^(a+1) - (k-1)^(a+1) = -k^(a+1) * expm1((a+1) * log1p(-1/k)), free of cancellation
    const double diff = -std::pow(kd, a1) * std::expm1(a1 * std::log1p(-1.0 / kd));
    b[k - 2] = std::exp(std::log(diff / a1) / alpha);
  }
  return b;
}

struct ToeplitzConvolver::Impl {
  std::size_t signal_length = 0;
  std::size_t fft_length = 0;
  std::size_t spectrum_length = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  FftwBuffer<fftw_complex> kernel_spectrum;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

class ToeplitzConvolver::Workspace {
 public:
  explicit Workspace(const Impl& impl)
      : real(fftw_alloc<double>(impl.fft_length)),
        spectrum(fftw_alloc<fftw_complex>(impl.spectrum_length)) {}
  FftwBuffer<double> real;
  FftwBuffer<fftw_complex> spectrum;
};

ToeplitzConvolver::ToeplitzConvolver(std::span<const double> kernel, std::size_t signal_length)
    : impl_(std::make_unique<Impl>()) {
  if (kernel.empty()) throw std::invalid_argument("toeplitz_convolve: empty kernel");
  if (kernel.size() > signal_length)
    throw std::invalid_argument("toeplitz_convolve: kernel longer than signal");
  auto& im = *impl_;
  im.signal_length = signal_length;
  im.fft_length = next_pow2(2 * signal_length - 1);
  im.spectrum_length = im.fft_length / 2 + 1;
  im.kernel_spectrum = fftw_alloc<fftw_complex>(im.spectrum_length);

  auto real = fftw_alloc<double>(im.fft_length);
  auto spec = fftw_alloc<fftw_complex>(im.spectrum_length);
  {
    std::lock_guard lock(planner_mutex());
    const int n = static_cast<int>(im.fft_length);
    im.forward = fftw_plan_dft_r2c_1d(n, real.get(), spec.get(), FFTW_ESTIMATE);
    im.backward = fftw_plan_dft_c2r_1d(n, spec.get(), real.get(), FFTW_ESTIMATE);
  }
  if (!im.forward || !im.backward) throw std::runtime_error("FFTW planning failed");

  std::fill_n(real.get(), im.fft_length, 0.0);
  std::copy(kernel.begin(), kernel.end(), real.get());
  fftw_execute_dft_r2c(im.forward, real.get(), im.kernel_spectrum.get());
  // Fold the inverse-transform normalisation into the kernel spectrum.
  simd::kernels().scale(&im.kernel_spectrum[0][0], 1.0 / static_cast<double>(im.fft_length),
                        2 * im.spectrum_length);
}

ToeplitzConvolver::~ToeplitzConvolver() = default;
ToeplitzConvolver::ToeplitzConvolver(ToeplitzConvolver&&) noexcept = default;
ToeplitzConvolver& ToeplitzConvolver::operator=(ToeplitzConvolver&&) noexcept = default;

std::size_t ToeplitzConvolver::signal_length() const noexcept { return impl_->signal_length; }
std::size_t ToeplitzConvolver::fft_length() const noexcept { return impl_->fft_length; }

void ToeplitzConvolver::WorkspaceDeleter::operator()(Workspace* ws) const noexcept { delete ws; }

ToeplitzConvolver::WorkspacePtr ToeplitzConvolver::make_workspace() const {
  return WorkspacePtr(new Workspace(*impl_));
}

void ToeplitzConvolver::apply(std::span<const double> signal, std::span<double> out,
                              Workspace& ws) const {
  const auto& im = *impl_;
  if (signal.size() != im.signal_length || out.size() < im.signal_length)
    throw std::invalid_argument("toeplitz_convolve: signal length mismatch");
  double* real = ws.real.get();
  std::copy(signal.begin(), signal.end(), real);
  std::fill(real + im.signal_length, real + im.fft_length, 0.0);
  fftw_execute_dft_r2c(im.forward, real, ws.spectrum.get());
  simd::kernels().complex_multiply(&ws.spectrum[0][0], &im.kernel_spectrum[0][0],
                                   &ws.spectrum[0][0], im.spectrum_length);
  fftw_execute_dft_c2r(im.backward, ws.spectrum.get(), real);
  std::copy_n(real, im.signal_length, out.begin());
}

Matrix toeplitz_convolve(std::span<const double> kernel, const Matrix& signal) {
  ToeplitzConvolver conv(kernel, signal.cols());
  auto ws = conv.make_workspace();
  Matrix out(signal.rows(), signal.cols());
  for (std::size_t p = 0; p < signal.rows(); ++p) conv.apply(signal.row(p), out.row(p), *ws);
  return out;
}

HybridPlan::HybridPlan(const TimeGrid& grid, double alpha, NearField near)
    : grid_(grid), alpha_(alpha), near_(near) {
  if (!(alpha > -0.5 && alpha < 0.0))
    throw std::invalid_argument("hybrid scheme: alpha must lie in (-1/2, 0)");
  const std::size_t N = grid.steps();
  const double dt = grid.dt();
  if (N >= 2) b_star_ = optimal_nodes(alpha, N);
  kernel_weights_.resize(b_star_.size());
  for (std::size_t i = 0; i < b_star_.size(); ++i)
    kernel_weights_[i] = std::pow(b_star_[i] * dt, alpha);

  const double norm = std::sqrt(2.0 * alpha + 1.0);
  conv_kernel_.resize(N);
  if (near == NearField::exact) {
    // int_0^dt (dt-s)^a dB_s = c dB + r Z with Cov(., dB) = dt^(a+1)/(a+1)
    const double a1 = alpha + 1.0, var = std::pow(dt, 2.0 * alpha + 1.0) / (2.0 * alpha + 1.0);
    const double c = std::pow(dt, alpha) / a1;
    conv_kernel_[0] = norm * c;
    near_residual_ = norm * std::sqrt(std::max(0.0, var - c * c * dt));
  } else {
    conv_kernel_[0] = norm * std::pow(0.5 * dt, alpha);
  }
  for (std::size_t i = 0; i < kernel_weights_.size(); ++i)
    conv_kernel_[i + 1] = norm * kernel_weights_[i];
  convolver_ = std::make_shared<const ToeplitzConvolver>(conv_kernel_, N);
}

void HybridPlan::simulate_path(std::span<const double> dB, std::span<const double> near,
                               std::span<double> out, ToeplitzConvolver::Workspace& ws) const {
  out[0] = 0.0;
  convolver_->apply(dB, out.subspan(1), ws);
  if (near_residual_ == 0.0) return;
  if (near.size() != dB.size()) throw std::invalid_argument("hybrid scheme: near stream length mismatch");
  for (std::size_t j = 0; j < near.size(); ++j) out[j + 1] += near_residual_ * near[j];
}

VolterraPaths simulate_volterra(const HybridPlan& plan, const PathIncrements& inc, int threads) {
  if (!(inc.grid == plan.grid()))
    throw std::invalid_argument("simulate_volterra: increments and plan use different grids");
  const std::size_t n = inc.n_paths();
  const std::size_t N = plan.grid().steps();
  VolterraPaths out{Matrix(n, N + 1), plan.grid(), plan.alpha()};

  constexpr std::size_t block = 256;
  parallel_for((n + block - 1) / block, threads, [&](std::size_t b) {
    auto ws = plan.convolver().make_workspace();
    const std::size_t end = std::min(n, (b + 1) * block);
    for (std::size_t p = b * block; p < end; ++p)
      plan.simulate_path(inc.dB.row(p), inc.near.row(p), out.values.row(p), *ws);
  });
  return out;
}

}  // namespace roughvol
