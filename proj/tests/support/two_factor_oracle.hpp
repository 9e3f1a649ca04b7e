#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>
#include <stdexcept>

#include "roughvol/analytics.hpp"

namespace roughvol::testing {

// Integrands are smooth sums of exponentials on bounded intervals.
template <class F>
double integrate(F f, double a, double b) {
  return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
}

// Definitional integrals with a flat curve, by nested quadrature.
inline ExpansionCoeffs two_factor_by_quadrature(const TwoFactorParams& p, double T, double xi0) {
  const double at = p.alpha_theta(), w = p.omega;
  const auto wx = p.omega_x(), wy = p.omega_y();
  auto lambda = [&](int i, double t, double u) {
    return at * w * xi0 * (wx[i] * std::exp(-p.kappa_x * (u - t)) + wy[i] * std::exp(-p.kappa_y * (u - t)));
  };
  auto dlambda = [&](double r, double u) {
    return at * w * (wx[0] * std::exp(-p.kappa_x * (u - r)) + wy[0] * std::exp(-p.kappa_y * (u - r)));
  };
  ExpansionCoeffs c;
  c.c_x_xi = integrate([&](double u) {
    return integrate([&](double t) { return std::sqrt(xi0) * lambda(0, t, u); }, 0.0, u);
  }, 0.0, T);
  for (int i = 0; i < 3; ++i)
    c.c_xi_xi += integrate([&](double s) {
      const double in = integrate([&](double u) { return lambda(i, s, u); }, s, T);
      return in * in;
    }, 0.0, T);
  c.c_mu = integrate([&](double s) {
    return integrate([&](double u) {
      const double a = integrate([&](double t) { return lambda(0, u, t); }, u, T) / (2 * std::sqrt(xi0));
      const double b = integrate([&](double r) { return std::sqrt(xi0) * dlambda(r, u); }, s, u);
      return std::sqrt(xi0) * lambda(0, s, u) * (a + b);
    }, s, T);
  }, 0.0, T);
  return c;
}

inline TwoFactorParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    TwoFactorParams p;
    p.omega = 0.5 + 2.5 * u(rng);
    p.theta = u(rng);
    p.kappa_y = 0.1 + 2.0 * u(rng);
    p.kappa_x = p.kappa_y + 0.5 + 8.0 * u(rng);
    p.rho_sx = -0.95 + 1.9 * u(rng);
    p.rho_sy = -0.95 + 1.9 * u(rng);
    p.rho_xy = -0.9 + 1.8 * u(rng);
    try {
      p.validate();
      return p;
    } catch (const std::invalid_argument&) {
    }
  }
}

}  // namespace roughvol::testing
