#include "roughvol/kernel.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace roughvol {

namespace {

using Gauss8 = boost::math::quadrature::gauss<double, 8>;

void check_hurst(double H) {
  if (!(H > 0.0 && H < 0.5)) throw std::invalid_argument("H must lie in (0, 1/2)");
}

void check_horizon(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
}

// Nodes and weights of the composite 8-point Gauss-Legendre rule on [0, 1]
// with `panels` equal panels.
std::vector<std::pair<double, double>> unit_rule(std::size_t panels) {
  const auto& x = Gauss8::abscissa();
  const auto& w = Gauss8::weights();
  const double h = 1.0 / static_cast<double>(panels);
  std::vector<std::pair<double, double>> rule;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = (static_cast<double>(p) + 0.5) * h;
    // Boost stores the non-negative half of a symmetric rule; x[0] == 0 for odd sizes only.
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = 0.5 * h * x[i], wi = 0.5 * h * w[i];
      if (x[i] == 0.0) {
        rule.emplace_back(mid, wi);
      } else {
        rule.emplace_back(mid - dx, wi);
        rule.emplace_back(mid + dx, wi);
      }
    }
  }
  return rule;
}

template <class F>
double gauss_unit(F&& f, std::size_t panels) {
  double total = 0.0;
  for (const auto& [u, wq] : unit_rule(panels)) total += wq * f(u);
  return total;
}

// Mass and first moment of mu(dx) = x^(-1/2-H) dx / Gamma(1/2-H) on [a, b].
struct CellMoments {
  double mass;
  double first;
};

CellMoments mu_cell(double a, double b, double H) {
  const double e = 0.5 - H;
  const double g = std::tgamma(e);
  const double mass = (std::pow(b, e) - std::pow(a, e)) / (e * g);
  const double first = (std::pow(b, e + 1.0) - std::pow(a, e + 1.0)) / ((e + 1.0) * g);
  return {mass, first};
}

double rmse_of(const std::vector<double>& w, const std::vector<double>& x,
               const std::vector<double>& tau, const std::vector<double>& target) {
  double ss = 0.0;
  for (std::size_t j = 0; j < tau.size(); ++j) {
    double k = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) k += w[i] * std::exp(-x[i] * tau[j]);
    const double r = k - target[j];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(tau.size()));
}

}  // namespace

ExpKernel::ExpKernel(std::vector<double> weights, std::vector<double> speeds, double H, double T)
    : H_(H), T_(T) {
  if (weights.empty() || weights.size() != speeds.size())
    throw std::invalid_argument("ExpKernel: weights and speeds must be non-empty and equal length");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("ExpKernel: weights must be positive");
    if (!(speeds[i] > 0.0) || !std::isfinite(speeds[i]))
      throw std::invalid_argument("ExpKernel: speeds must be positive");
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return speeds[a] < speeds[b]; });
  for (std::size_t idx : order) {
    if (!speeds_.empty() && speeds_.back() == speeds[idx]) {
      weights_.back() += weights[idx];
    } else {
      speeds_.push_back(speeds[idx]);
      weights_.push_back(weights[idx]);
    }
  }
}

double ExpKernel::operator()(double tau) const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) s += weights_[i] * std::exp(-speeds_[i] * tau);
  return s;
}

double ExpKernel::derivative(double tau, int order) const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    s += weights_[i] * std::pow(-speeds_[i], order) * std::exp(-speeds_[i] * tau);
  return s;
}

ExpKernel ExpKernel::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("ExpKernel::scaled: factor must be positive");
  std::vector<double> w = weights_;
  for (double& v : w) v *= c;
  return ExpKernel(std::move(w), speeds_, H_, T_);
}

double power_kernel(double tau, double H) {
  if (!(tau > 0.0)) throw std::domain_error("power_kernel: tau must be positive");
  return std::pow(tau, H - 0.5);
}

double laplace_mu(double tau, double H, double x_max, std::size_t n_quad) {
  if (!(tau > 0.0)) throw std::domain_error("laplace_mu: tau must be positive");
  check_hurst(H);
  if (!(x_max > 0.0)) throw std::invalid_argument("laplace_mu: x_max must be positive");
  if (n_quad < 1) throw std::invalid_argument("laplace_mu: n_quad must be positive");
  const double e = 0.5 - H;
  const double q = 1.0 / e;
  const double pre = std::pow(x_max, e) * q / std::tgamma(e);
  return pre * gauss_unit([&](double u) { return std::exp(-tau * x_max * std::pow(u, q)); },
                          n_quad);
}

double closed_form_partition_width(std::size_t n, double H, double T) {
  check_hurst(H);
  check_horizon(T);
  if (n < 1) throw std::invalid_argument("closed_form_kernel: n must be at least 1");
  const double r = std::sqrt(10.0) * (0.5 - H) / (2.5 - H);
  return std::pow(static_cast<double>(n), -0.2) / T * std::pow(r, 0.4);
}

double closed_form_bound_constant(double H, double T) {
  check_hurst(H);
  check_horizon(T);
  const double r = std::sqrt(10.0) * (0.5 - H) / (2.5 - H);
  return 1.0 / (std::sqrt(2.0) * H * std::tgamma(0.5 - H)) * std::pow(T, H) *
         std::pow(r, -2.5 * H) * (2.5 / (2.5 - H));
}

ClosedFormKernel closed_form_kernel(std::size_t n, double H, double T) {
  const double pi = closed_form_partition_width(n, H, T);
  const double e = 0.5 - H;
  std::vector<double> w(n), x(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const double hi = static_cast<double>(i) * pi;
    const double lo = static_cast<double>(i - 1) * pi;
    const double de = std::pow(hi, e) - std::pow(lo, e);
    const double de1 = std::pow(hi, e + 1.0) - std::pow(lo, e + 1.0);
    w[i - 1] = de / (e * std::tgamma(e));
    x[i - 1] = (e / (e + 1.0)) * de1 / de;
  }
  ExpKernel k(std::move(w), std::move(x), H, T);
  const double C = closed_form_bound_constant(H, T);
  KernelErrorCert cert{kernel_l2_error(k, H, T, 400), C * std::pow(static_cast<double>(n), -0.8 * H),
                       C, pi};
  return {std::move(k), cert};
}

double kernel_l2_error(const ExpKernel& k, double H, double T, std::size_t n_quad, double scale) {
  check_hurst(H);
  check_horizon(T);
  if (n_quad < 1) throw std::invalid_argument("kernel_l2_error: n_quad must be positive");
  const double p = 1.0 / (2.0 * H);
  const double a = H - 0.5;
  const double integral = gauss_unit(
      [&](double u) {
        if (u <= 0.0) return 0.0;
        const double tau = T * std::pow(u, p);
        const double jac = T * p * std::pow(u, p - 1.0);
        // tau^a * sqrt(jac) stays bounded as u -> 0; combine before squaring
        const double sj = std::sqrt(jac);
        const double d = k(tau) * sj - scale * std::pow(tau, a) * sj;
        return d * d;
      },
      n_quad);
  return std::sqrt(integral);
}

double volterra_kernel(double tau, double H) {
  check_hurst(H);
  if (!(tau > 0.0)) throw std::domain_error("volterra_kernel: tau must be positive");
  const double a = H - 0.5;
  return std::sqrt(2.0 * a + 1.0) * std::pow(tau, a);
}

std::vector<double> fit_grid(double T, std::size_t N_grid) {
  check_horizon(T);
  if (N_grid < 2) throw std::invalid_argument("fit grid needs N_grid >= 2");
  std::vector<double> tau(N_grid - 1);
  for (std::size_t j = 1; j < N_grid; ++j)
    tau[j - 1] = static_cast<double>(j) * T / static_cast<double>(N_grid);
  return tau;
}

double grid_rmse(const ExpKernel& k, double H, double T, std::size_t N_grid) {
  const auto tau = fit_grid(T, N_grid);
  std::vector<double> target(tau.size());
  for (std::size_t j = 0; j < tau.size(); ++j) target[j] = volterra_kernel(tau[j], H);
  return rmse_of(k.weights(), k.speeds(), tau, target);
}

ExpKernel initial_kernel_guess(double H, double T, std::size_t N_grid, std::size_t n) {
  check_hurst(H);
  check_horizon(T);
  if (n < 1) throw std::invalid_argument("kernel fit: n must be at least 1");
  if (N_grid < 2) throw std::invalid_argument("fit grid needs N_grid >= 2");
  const double lo = 0.1 / T;
  const double hi = 50.0 * static_cast<double>(N_grid) / T;
  std::vector<double> edges{0.0};
  if (n == 1) {
    edges.push_back(hi);
  } else {
    const double ratio = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) edges.push_back(lo * std::exp(ratio * static_cast<double>(i)));
  }
  const double norm = std::sqrt(2.0 * H);  // sqrt(2 alpha + 1)
  std::vector<double> w(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = mu_cell(edges[i], edges[i + 1], H);
    w[i] = norm * m.mass;
    x[i] = m.first / m.mass;
  }
  return ExpKernel(std::move(w), std::move(x), H, T);
}

KernelFit fit_kernel_ls(double H, double T, std::size_t N_grid, std::size_t n,
                        const ExpKernel& init, const FitOptions& options) {
  check_hurst(H);
  check_horizon(T);
  if (n < 1) throw std::invalid_argument("kernel fit: n must be at least 1");
  if (init.size() != n)
    throw std::invalid_argument("kernel fit: initial kernel has " + std::to_string(init.size()) +
                                " terms, expected " + std::to_string(n));
  const auto grid = fit_grid(T, N_grid);
  const std::size_t m_grid = grid.size();
  // Rows: grid lags with unit weight, then optional penalty rows on (0, tau_1]
  // after tau = tau_1 u^(1/(2H)), which keeps the weighted target bounded.
  std::vector<double> tau(grid), row_weight(m_grid, 1.0);
  if (options.subgrid_weight > 0.0) {
    const double q = 1.0 / (2.0 * H);
    for (const auto& [u, wq] : unit_rule(4)) {
      tau.push_back(grid[0] * std::pow(u, q));
      row_weight.push_back(options.subgrid_weight * std::sqrt(wq * grid[0] * q * std::pow(u, q - 1.0)));
    }
  }
  const std::size_t m = tau.size();
  const std::size_t np = 2 * n;
  Eigen::VectorXd y(m);
  for (std::size_t j = 0; j < m; ++j) y[j] = volterra_kernel(tau[j], H);
  std::vector<double> grid_target(y.data(), y.data() + m_grid);

  Eigen::VectorXd p(np);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::log(init.weights()[i]);
    p[n + i] = std::log(init.speeds()[i]);
  }

  Eigen::MatrixXd J(m, np);
  Eigen::VectorXd r(m);
  auto evaluate = [&](const Eigen::VectorXd& q, bool jacobian) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = std::exp(q[i]);
        const double x = std::exp(q[n + i]);
        const double e = row_weight[j] * w * std::exp(-x * tau[j]);
        s += e;
        if (jacobian) {
          J(j, i) = e;
          J(j, n + i) = -x * tau[j] * e;
        }
      }
      r[j] = s - row_weight[j] * y[j];
    }
    return 0.5 * r.squaredNorm();
  };

  auto make_fit = [&](const Eigen::VectorXd& q, double cost, int it, double gnorm) {
    std::vector<double> w(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::exp(q[i]);
      x[i] = std::exp(q[n + i]);
    }
    const double rmse = rmse_of(w, x, grid, grid_target);
    (void)cost;
    return KernelFit{ExpKernel(std::move(w), std::move(x), H, T), rmse, it, gnorm};
  };

  double cost = evaluate(p, true);
  Eigen::VectorXd g = J.transpose() * r;
  // Marquardt scaling by the Jacobian column norms; Nielsen's damping update.
  Eigen::VectorXd scale(np);
  double lambda = 1e-3;
  double nu = 2.0;
  Eigen::MatrixXd aug(m + np, np);
  Eigen::VectorXd rhs(m + np);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double gnorm = g.norm();
    if (gnorm <= options.gradient_tolerance || cost == 0.0) return make_fit(p, cost, it, gnorm);
    scale = J.colwise().norm().transpose().cwiseMax(1e-300);

    bool accepted = false;
    while (lambda < 1e20) {
      // Solve min |J s + r|^2 + lambda |D s|^2 by QR of the stacked system.
      aug.topRows(m) = J;
      aug.bottomRows(np) = (std::sqrt(lambda) * scale).asDiagonal();
      rhs.head(m) = -r;
      rhs.tail(np).setZero();
      const Eigen::VectorXd step = aug.colPivHouseholderQr().solve(rhs);
      const Eigen::VectorXd trial = p + step;
      if (!step.allFinite() || trial.cwiseAbs().maxCoeff() > 700.0) {
        lambda *= nu;
        nu *= 2.0;
        continue;
      }
      const Eigen::VectorXd Ds = scale.cwiseProduct(step);
      const double predicted = 0.5 * (lambda * Ds.squaredNorm() - step.dot(g));
      const Eigen::VectorXd r_keep = r;
      const double trial_cost = evaluate(trial, false);
      const double gain = predicted > 0.0 ? (cost - trial_cost) / predicted : -1.0;
      if (std::isfinite(trial_cost) && trial_cost < cost && gain > 0.0) {
        const bool tiny = step.norm() <= 1e-14 * (1.0 + p.norm());
        p = trial;
        cost = evaluate(p, true);
        g = J.transpose() * r;
        const double c = 2.0 * gain - 1.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - c * c * c);
        nu = 2.0;
        accepted = true;
        if (tiny) return make_fit(p, cost, it + 1, g.norm());
        break;
      }
      r = r_keep;
      lambda *= nu;
      nu *= 2.0;
    }
    if (!accepted) {
      // No descent direction left at working precision: a numerical stationary point.
      return make_fit(p, cost, it, g.norm());
    }
  }
  throw FitFailure("kernel fit did not converge in " + std::to_string(options.max_iterations) +
                       " iterations",
                   make_fit(p, cost, it, g.norm()));
}

}  // namespace roughvol
