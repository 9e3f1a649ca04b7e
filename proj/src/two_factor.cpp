#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <stdexcept>

#include "roughvol/analytics.hpp"

namespace roughvol {

namespace {

// Taylor sums of J, K and H, used where the closed forms cancel.
double series_j(double z) {
  double term = 0.5, sum = 0.0;  // (-1)^m z^(m-2) / m!, m >= 2
  for (int m = 2; m < 40; ++m) {
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    term *= -z / (m + 1);
  }
  return sum;
}

double series_k(double z) {
  double fact = 0.5, sum = 0.0;  // (-1)^m (m-1) z^(m-2) / m!
  for (int m = 2; m < 40; ++m) {
    const double term = (m - 1) * fact;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    fact *= -z / (m + 1);
  }
  return sum;
}

double series_h(double z) {
  double fact = 1.0 / 6.0, sum = 0.0;  // (-1)^(m+1) (m-2) z^(m-3) / m!, m >= 3
  for (int m = 3; m < 40; ++m) {
    const double term = (m - 2) * fact;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    fact *= -z / (m + 1);
  }
  return sum;
}

// (e^-x - e^-y) / (y - x), equal to e^-x when x == y.
double exp_divided_difference(double x, double y) {
  const double d = y - x;
  if (std::abs(d) < 1e-12 * std::max(1.0, std::abs(x))) return std::exp(-x);
  return std::exp(-x) * (-std::expm1(-d) / d);
}

}  // namespace

HelperValues helper_functions(double z) {
  if (!(z >= 0.0)) throw std::invalid_argument("helper_functions: z must be non-negative");
  if (z < 1e-4) {
    const double z2 = z * z, z3 = z2 * z, z4 = z3 * z;
    return {1.0 - z / 2.0 + z2 / 6.0 - z3 / 24.0 + z4 / 120.0,
            0.5 - z / 6.0 + z2 / 24.0 - z3 / 120.0 + z4 / 720.0,
            0.5 - z / 3.0 + z2 / 8.0 - z3 / 30.0 + z4 / 144.0,
            1.0 / 6.0 - z / 12.0 + z2 / 40.0 - z3 / 180.0 + z4 / 1008.0};
  }
  const double I = -std::expm1(-z) / z;
  if (z < 1.0) return {I, series_j(z), series_k(z), series_h(z)};
  const double e = std::exp(-z);
  const double z2 = z * z;
  const double J = (z - 1.0 + e) / z2;
  const double K = (1.0 - e - z * e) / z2;
  return {I, J, K, (J - K) / z};
}

void TwoFactorParams::validate() const {
  if (!(omega > 0.0)) throw std::invalid_argument("two-factor: omega must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("two-factor: theta must lie in [0, 1]");
  if (!(kappa_y > 0.0 && kappa_x > kappa_y))
    throw std::invalid_argument("two-factor: requires kappa_x > kappa_y > 0");
  if (!(std::abs(rho_sx) < 1.0 && std::abs(rho_sy) < 1.0 && std::abs(rho_xy) <= 1.0))
    throw std::invalid_argument("two-factor: correlations must lie in (-1, 1)");
  if (!(std::abs(chi()) <= 1.0))
    throw std::invalid_argument("two-factor: correlations are not jointly admissible (|chi| > 1)");
  const double s = (1.0 - theta) * (1.0 - theta) + 2.0 * rho_xy * theta * (1.0 - theta) + theta * theta;
  if (!(s > 0.0)) throw std::invalid_argument("two-factor: degenerate mixing");
}

double TwoFactorParams::alpha_theta() const {
  return 1.0 / std::sqrt((1.0 - theta) * (1.0 - theta) + 2.0 * rho_xy * theta * (1.0 - theta) +
                         theta * theta);
}

double TwoFactorParams::chi() const {
  return (rho_xy - rho_sx * rho_sy) / (std::sqrt(1.0 - rho_sx * rho_sx) * std::sqrt(1.0 - rho_sy * rho_sy));
}

std::array<double, 3> TwoFactorParams::omega_x() const {
  return {(1.0 - theta) * rho_sx, (1.0 - theta) * std::sqrt(1.0 - rho_sx * rho_sx), 0.0};
}

std::array<double, 3> TwoFactorParams::omega_y() const {
  const double c = chi();
  const double r = 1.0 - rho_sy * rho_sy;
  return {theta * rho_sy, theta * c * std::sqrt(r), theta * std::sqrt((1.0 - c * c) * r)};
}

ExpansionCoeffs two_factor_coeffs(const TwoFactorParams& p, double T, double xi0) {
  p.validate();
  if (!(T > 0.0)) throw std::invalid_argument("two-factor: T must be positive");
  if (!(xi0 > 0.0)) throw std::invalid_argument("two-factor: xi0 must be positive");
  const double at = p.alpha_theta();
  const double w = p.omega;
  const auto wx = p.omega_x();
  const auto wy = p.omega_y();
  const double x = p.kappa_x * T;
  const double y = p.kappa_y * T;
  const auto hx = helper_functions(x), hy = helper_functions(y);

  ExpansionCoeffs c;
  c.c_x_xi = at * w * std::pow(xi0, 1.5) * T * T * (wx[0] * hx.J + wy[0] * hy.J);

  double w0 = 0.0, wX = 0.0, wY = 0.0, wXX = 0.0, wYY = 0.0, wXY = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double a = wx[i] / x, b = wy[i] / y;
    w0 += (a + b) * (a + b);
    wX += -2.0 * a * (a + b);
    wY += -2.0 * b * (a + b);
    wXX += a * a;
    wYY += b * b;
    wXY += 2.0 * a * b;
  }
  c.c_xi_xi = at * at * w * w * xi0 * xi0 * T * T * T *
              (w0 + wX * hx.I + wY * hy.I + wXX * helper_functions(2.0 * x).I +
               wYY * helper_functions(2.0 * y).I + wXY * helper_functions(x + y).I);

  const double ws[2] = {wx[0], wy[0]};
  const double xs[2] = {x, y};
  const double Is[2] = {hx.I, hy.I};
  const double Js[2] = {hx.J, hy.J};
  double c1 = 0.0, c2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      c1 += ws[a] * ws[b] * 0.5 * (1.0 - Is[a] - Is[b] + exp_divided_difference(xs[a], xs[b])) /
            (xs[a] * xs[b]);
      c2 += ws[a] * ws[b] * (Js[a] - helper_functions(xs[a] + xs[b]).J) / xs[b];
    }
  c.c_mu = at * at * w * w * xi0 * xi0 * T * T * T * (c1 + c2);
  return c;
}

double two_factor_shape_constant_x(const TwoFactorParams& p) {
  p.validate();
  return p.alpha_theta() * p.omega * p.omega_x()[0] / (2.0 * p.kappa_x * p.kappa_x);
}

double two_factor_shape_constant_y(const TwoFactorParams& p) {
  p.validate();
  return p.alpha_theta() * p.omega * p.omega_y()[0] / (2.0 * p.kappa_y * p.kappa_y);
}

double two_factor_skew_shape(const TwoFactorParams& p, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("two-factor: T must be positive");
  const double x = p.kappa_x * T, y = p.kappa_y * T;
  // kT - 1 + e^{-kT} = (kT)^2 J(kT), which stays accurate for small kT
  return two_factor_shape_constant_x(p) * x * x * helper_functions(x).J / (T * T) +
         two_factor_shape_constant_y(p) * y * y * helper_functions(y).J / (T * T);
}

double rbergomi_c_x_xi_closed_form(const ModelParams& params, double T) {
  params.validate();
  const double a = params.alpha();
  const double ch = params.rho * params.eta * std::sqrt(2.0 * params.H) / ((a + 1.0) * (a + 2.0));
  return ch * std::pow(params.xi0, 1.5) * std::pow(T, params.H + 1.5);
}

ExpansionCoeffs rbergomi_expansion_coeffs(const ModelParams& params, double T, double tolerance) {
  params.validate();
  if (!(T > 0.0)) throw std::invalid_argument("rbergomi_expansion_coeffs: T must be positive");
  const double a = params.alpha();
  const double xi0 = params.xi0;
  const double norm = std::sqrt(2.0 * a + 1.0);
  boost::math::quadrature::tanh_sinh<double> ts;

  // u - s from the abscissa and its complement, exact next to the singular endpoint
  auto gap = [](double uc, double s, double T) { return uc < 0.0 ? -uc : (T - s) - uc; };

  // int_s^T (u - s)^a du, numerically
  auto inner = [&](double s) {
    if (T - s <= 0.0) return 0.0;
    return ts.integrate([&](double, double uc) { return std::pow(gap(uc, s, T), a); }, s, T, tolerance);
  };
  auto outer = [&](auto&& g) { return ts.integrate(g, 0.0, T, tolerance); };

  ExpansionCoeffs c;
  c.c_x_xi = params.rho * params.eta * norm * std::pow(xi0, 1.5) * outer([&](double s) { return inner(s); });
  c.c_xi_xi = params.eta * params.eta * (2.0 * a + 1.0) * xi0 * xi0 * outer([&](double s) {
                const double v = inner(s);
                return v * v;
              });
  // Bracket: int_s^u (u-t)^a dt + 1/2 int_u^T (t-u)^a dt, both elementary.
  const double a1 = a + 1.0;
  c.c_mu = params.rho * params.rho * params.eta * params.eta * (2.0 * a + 1.0) * xi0 * xi0 *
           outer([&](double s) {
             if (T - s <= 0.0) return 0.0;
             return ts.integrate(
                 [&](double, double uc) {
                   const double d = gap(uc, s, T);
                   const double bracket = std::pow(d, a1) / a1 + 0.5 * std::pow(std::max(T - s - d, 0.0), a1) / a1;
                   return std::pow(d, a) * bracket;
                 },
                 s, T, tolerance);
           });
  return c;
}

ExpansionTerms expansion_terms(const ExpansionCoeffs& c, double v, double T, double epsilon) {
  if (!(v > 0.0)) throw std::invalid_argument("expansion: total variance must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("expansion: T must be positive");
  const double vs = std::sqrt(v / T);
  const double cx = c.c_x_xi, cxx = c.c_xi_xi, cm = c.c_mu;
  const double e = epsilon, e2 = epsilon * epsilon;
  const double v2 = v * v, v3 = v2 * v, v4 = v3 * v;
  ExpansionTerms t;
  t.sigma_vs = vs;
  t.sigma_atm = vs * (1.0 + e / (4.0 * v) * cx +
                      e2 / (32.0 * v3) * (12.0 * cx * cx - v * (v + 4.0) * cxx + 4.0 * v * (v - 4.0) * cm));
  t.skew = vs * (e / (2.0 * v2) * cx + e2 / (8.0 * v3) * (4.0 * cm * v - 3.0 * cx * cx));
  t.curvature = vs * e2 / (8.0 * v4) * (4.0 * cm * v + cxx * v - 6.0 * cx * cx);
  return t;
}

double sigma_bs_expansion(const ExpansionCoeffs& c, double v, double T, double k, double epsilon) {
  const auto t = expansion_terms(c, v, T, epsilon);
  return t.sigma_atm + t.skew * k + t.curvature * k * k;
}

}  // namespace roughvol
