#include "roughvol/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "roughvol/simd.hpp"

namespace roughvol {

namespace {

// (1 - exp(-z h)) / z, continuous at z = 0.
double one_minus_exp_over(double z, double h) {
  const double zh = z * h;
  if (std::abs(zh) < 1e-12) return h;
  return -std::expm1(-zh) / z;
}

}  // namespace

VariancePaths rbergomi_variance(const VolterraPaths& volterra, const ModelParams& params) {
  params.validate();
  if (std::abs(volterra.alpha - params.alpha()) > 1e-14)
    throw std::invalid_argument("rbergomi_variance: Volterra paths use a different alpha");
  const TimeGrid& grid = volterra.grid;
  const std::size_t N = grid.steps();
  const double a1 = 2.0 * params.alpha() + 1.0;
  std::vector<double> comp(N + 1);
  for (std::size_t j = 0; j <= N; ++j)
    comp[j] = 0.5 * params.eta * params.eta * std::pow(grid.node(j), a1);

  VariancePaths out{Matrix(volterra.values.rows(), N + 1), grid, params};
  for (std::size_t p = 0; p < out.values.rows(); ++p) {
    const auto x = volterra.values.row(p);
    auto v = out.values.row(p);
    v[0] = params.xi0;
    for (std::size_t j = 1; j <= N; ++j) v[j] = params.xi0 * std::exp(params.eta * x[j] - comp[j]);
  }
  return out;
}

void log_price_path(std::span<const double> variance, std::span<const double> dW, double dt,
                    std::span<double> out) {
  const std::size_t N = dW.size();
  out[0] = 0.0;
  simd::kernels().log_price_increments(variance.data(), dW.data(), dt, out.data() + 1, N);
  for (std::size_t j = 1; j <= N; ++j) out[j] += out[j - 1];
}

Matrix rbergomi_log_price(const VariancePaths& V, const PathIncrements& inc) {
  if (!(V.grid == inc.grid))
    throw std::invalid_argument("rbergomi_log_price: variance and increments use different grids");
  if (V.values.rows() != inc.n_paths())
    throw std::invalid_argument("rbergomi_log_price: path counts differ");
  const std::size_t N = V.grid.steps();
  Matrix out(inc.n_paths(), N + 1);
  for (std::size_t p = 0; p < inc.n_paths(); ++p)
    log_price_path(V.values.row(p), inc.dW.row(p), V.grid.dt(), out.row(p));
  return out;
}

double table2_mult_factor_squared(std::size_t steps) {
  switch (steps) {
    case 50:
      return 0.750323909;
    case 100:
      return 0.550447453;
    case 150:
      return 0.485093611;
    case 200:
      return 0.450392126;
    default:
      throw std::invalid_argument("no tabulated multiplication factor for " +
                                  std::to_string(steps) + " steps");
  }
}

void AbergomiConfig::validate() const {
  params.validate();
  const double T = kernel.horizon();
  if (!(theta > 0.0 && theta <= T))
    throw std::invalid_argument("aBergomi: theta must lie in (0, T]");
  if (!(mult_factor > 0.0) || !std::isfinite(mult_factor))
    throw std::invalid_argument("aBergomi: multiplication factor must be positive");
}

std::vector<double> AbergomiConfig::decay_speeds() const {
  const double r = theta / kernel.horizon();
  std::vector<double> k = kernel.speeds();
  for (double& v : k) v *= r;
  return k;
}

std::vector<double> AbergomiConfig::prefactor_speeds() const {
  const double r = theta / kernel.horizon();
  std::vector<double> k = kernel.speeds();
  for (double& v : k) v *= 1.0 - r;
  return k;
}

double AbergomiConfig::scaling() const { return std::sqrt(theta / kernel.horizon()); }

AbergomiConfig make_abergomi_config(ExpKernel kernel, const ModelParams& params,
                                    const TimeGrid& grid) {
  if (std::abs(kernel.horizon() - grid.horizon()) > 1e-12 * grid.horizon())
    throw std::invalid_argument("aBergomi: kernel horizon differs from the grid horizon");
  AbergomiConfig cfg{std::move(kernel), params, grid.horizon() - grid.dt()};
  cfg.validate();
  return cfg;
}

std::vector<OUFactorState> simulate_ou_factors(const AbergomiConfig& cfg,
                                               const PathIncrements& inc) {
  cfg.validate();
  const TimeGrid& grid = inc.grid;
  const std::size_t N = grid.steps();
  const std::size_t n = cfg.kernel.size();
  const std::size_t P = inc.n_paths();
  const double dt = grid.dt();
  const auto k = cfg.decay_speeds();

  std::vector<OUFactorState> states;
  states.reserve(N + 1);
  states.push_back({0.0, Matrix(P, n)});
  for (std::size_t j = 0; j < N; ++j) {
    OUFactorState next{grid.node(j + 1), states.back().Y};
    for (std::size_t p = 0; p < P; ++p) {
      auto y = next.Y.row(p);
      const double db = inc.dB(p, j);
      for (std::size_t i = 0; i < n; ++i) {
        if (cfg.stepping == FactorStepping::exponential)
          y[i] = std::exp(-k[i] * dt) * (y[i] + db);
        else
          y[i] += db - k[i] * dt * y[i];
      }
    }
    states.push_back(std::move(next));
  }
  return states;
}

Matrix abergomi_driver(const AbergomiConfig& cfg, const std::vector<OUFactorState>& factors) {
  if (factors.empty()) throw std::invalid_argument("abergomi_driver: no factor states");
  const std::size_t n = cfg.kernel.size();
  const std::size_t P = factors.front().Y.rows();
  const auto kt = cfg.prefactor_speeds();
  const auto& w = cfg.kernel.weights();
  Matrix y(P, factors.size());
  std::vector<double> coeff(n);
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (factors[j].Y.cols() != n || factors[j].Y.rows() != P)
      throw std::invalid_argument("abergomi_driver: factor state shape mismatch");
    for (std::size_t i = 0; i < n; ++i) coeff[i] = w[i] * std::exp(-kt[i] * factors[j].time);
    for (std::size_t p = 0; p < P; ++p) {
      const auto Y = factors[j].Y.row(p);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += coeff[i] * Y[i];
      y(p, j) = s;
    }
  }
  return y;
}

namespace {

std::vector<double> compensator_table(const AbergomiConfig& cfg, const TimeGrid& grid) {
  const std::size_t N = grid.steps();
  const double eta = cfg.params.eta;
  std::vector<double> comp(N + 1);
  if (!cfg.exact_compensator) {
    const double a1 = 2.0 * cfg.params.alpha() + 1.0;
    for (std::size_t j = 0; j <= N; ++j) comp[j] = 0.5 * eta * eta * std::pow(grid.node(j), a1);
    return comp;
  }
  // Half the variance of m eta sqrt(r) y_t for the continuous-time factors.
  const auto kd = cfg.decay_speeds();
  const auto kp = cfg.prefactor_speeds();
  const auto& w = cfg.kernel.weights();
  const double c = cfg.exponent_factor() * eta * cfg.scaling();
  const std::size_t n = w.size();
  for (std::size_t j = 0; j <= N; ++j) {
    const double t = grid.node(j);
    double var = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        var += w[a] * w[b] * std::exp(-(kp[a] + kp[b]) * t) * one_minus_exp_over(kd[a] + kd[b], t);
    comp[j] = 0.5 * c * c * var;
  }
  return comp;
}

}  // namespace

VariancePaths abergomi_variance(const AbergomiConfig& cfg, const Matrix& y, const TimeGrid& grid) {
  cfg.validate();
  const std::size_t N = grid.steps();
  if (y.cols() != N + 1) throw std::invalid_argument("abergomi_variance: driver has wrong length");
  const auto comp = compensator_table(cfg, grid);
  const double c = cfg.exponent_factor() * cfg.params.eta * cfg.scaling();
  const double xi0 = cfg.params.xi0;
  VariancePaths out{Matrix(y.rows(), N + 1), grid, cfg.params};
  for (std::size_t p = 0; p < y.rows(); ++p)
    for (std::size_t j = 0; j <= N; ++j) out.values(p, j) = xi0 * std::exp(c * y(p, j) - comp[j]);
  return out;
}

AbergomiPlan::AbergomiPlan(const AbergomiConfig& cfg, const TimeGrid& grid)
    : cfg_(cfg), grid_(grid), n_(cfg.kernel.size()) {
  cfg_.validate();
  const std::size_t N = grid.steps();
  const double dt = grid.dt();
  const auto kd = cfg_.decay_speeds();
  const auto kp = cfg_.prefactor_speeds();
  const auto& w = cfg_.kernel.weights();
  step_coeff_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i)
    step_coeff_[i] = cfg_.stepping == FactorStepping::exponential ? std::exp(-kd[i] * dt) : kd[i] * dt;
  node_weights_.resize((N + 1) * n_);
  for (std::size_t j = 0; j <= N; ++j)
    for (std::size_t i = 0; i < n_; ++i)
      node_weights_[j * n_ + i] = w[i] * std::exp(-kp[i] * grid.node(j));
  compensator_ = compensator_table(cfg_, grid);
  exponent_scale_ = cfg_.exponent_factor() * cfg_.params.eta * cfg_.scaling();
}

void AbergomiPlan::simulate_driver(std::span<const double> dB, std::span<double> y,
                                   std::span<double> state) const {
  const std::size_t N = grid_.steps();
  const auto& k = simd::kernels();
  std::fill_n(state.begin(), n_, 0.0);
  y[0] = 0.0;
  const bool expo = cfg_.stepping == FactorStepping::exponential;
  for (std::size_t j = 0; j < N; ++j) {
    const double* wts = node_weights_.data() + (j + 1) * n_;
    y[j + 1] = expo ? k.ou_decay_step_dot(state.data(), step_coeff_.data(), dB[j], wts, n_)
                    : k.ou_euler_step_dot(state.data(), step_coeff_.data(), dB[j], wts, n_);
  }
}

void AbergomiPlan::simulate_variance(std::span<const double> dB, std::span<double> V,
                                     std::span<double> state) const {
  simulate_driver(dB, V, state);
  const double xi0 = cfg_.params.xi0;
  for (std::size_t j = 0; j < V.size() && j <= grid_.steps(); ++j)
    V[j] = xi0 * std::exp(exponent_scale_ * V[j] - compensator_[j]);
}

double quadratic_variation_chi(const ExpKernel& kernel, double s, double t) {
  if (!(s >= 0.0)) throw std::invalid_argument("quadratic_variation_chi: s must be non-negative");
  if (s > t) throw std::invalid_argument("quadratic_variation_chi: requires s <= t");
  const auto& w = kernel.weights();
  const auto& x = kernel.speeds();
  double chi = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a)
    for (std::size_t b = 0; b < w.size(); ++b) {
      const double z = x[a] + x[b];
      chi += w[a] * w[b] * std::exp(-z * (t - s)) * one_minus_exp_over(z, s);
    }
  return chi;
}

std::vector<double> variance_conditional_expectation(const ExpKernel& kernel,
                                                     const OUFactorState& state, double s,
                                                     double t, double sigma, double xi0,
                                                     AffineForm form) {
  if (s > t) throw std::invalid_argument("variance_conditional_expectation: requires s <= t");
  if (std::abs(state.time - s) > 1e-12 * std::max(1.0, t))
    throw std::invalid_argument("variance_conditional_expectation: state is not at time s");
  const std::size_t n = kernel.size();
  if (state.Y.cols() != n)
    throw std::invalid_argument("variance_conditional_expectation: state has wrong factor count");
  const auto& w = kernel.weights();
  const auto& x = kernel.speeds();
  const double h = t - s;

  double drift = 0.0;
  if (form == AffineForm::exact) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) drift += w[a] * w[b] * one_minus_exp_over(x[a] + x[b], h);
  } else {
    for (std::size_t a = 0; a < n; ++a) drift += w[a] * one_minus_exp_over(x[a], h);
  }
  drift *= 0.5 * sigma * sigma;

  std::vector<double> coeff(n);
  for (std::size_t i = 0; i < n; ++i) coeff[i] = sigma * w[i] * std::exp(-x[i] * h);
  std::vector<double> out(state.Y.rows());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto Y = state.Y.row(p);
    double level = 0.0;
    for (std::size_t i = 0; i < n; ++i) level += coeff[i] * Y[i];
    out[p] = xi0 * std::exp(drift + level);
  }
  return out;
}

OUTransition ou_exact_transition(const ExpKernel& kernel, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("ou_exact_transition: horizon must be positive");
  const std::size_t n = kernel.size();
  const auto& x = kernel.speeds();
  Eigen::MatrixXd cov(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) cov(a, b) = one_minus_exp_over(x[a] + x[b], h);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("ou_exact_transition: covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  OUTransition tr{std::vector<double>(n), std::vector<double>(n * n, 0.0), n};
  for (std::size_t a = 0; a < n; ++a) {
    tr.decay[a] = std::exp(-x[a] * h);
    for (std::size_t b = 0; b <= a; ++b) tr.cholesky[a * n + b] = L(a, b);
  }
  return tr;
}

}  // namespace roughvol
