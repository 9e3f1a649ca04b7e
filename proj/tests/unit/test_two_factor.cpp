#include <doctest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <random>

#include "roughvol/analytics.hpp"
#include "two_factor_oracle.hpp"

using namespace roughvol;
using namespace roughvol::testing;

TEST_CASE("helper functions: series limits, z = 1 and large z") {
  const auto h0 = helper_functions(0.0);
  CHECK(std::abs(h0.I - 1.0) < 1e-8);
  CHECK(std::abs(h0.J - 0.5) < 1e-8);
  CHECK(std::abs(h0.K - 0.5) < 1e-8);
  CHECK(std::abs(h0.H - 1.0 / 6.0) < 1e-8);
  const auto hs = helper_functions(1e-7);
  CHECK(std::abs(hs.H - 1.0 / 6.0) < 1e-8);

  const long double z = 1.0L, e = std::exp(-z);
  const long double J = (z - 1 + e) / (z * z), K = (1 - e - z * e) / (z * z);
  const auto h1 = helper_functions(1.0);
  CHECK(std::abs(h1.I - static_cast<double>(1 - e)) < 1e-12);
  CHECK(std::abs(h1.J - static_cast<double>(J)) < 1e-12);
  CHECK(std::abs(h1.K - static_cast<double>(K)) < 1e-12);
  CHECK(std::abs(h1.H - static_cast<double>(J - K)) < 1e-12);

  // both sides of the series switch agree
  for (double zz : {1e-4, 0.5, 1.0}) {
    const auto lo = helper_functions(zz * (1 - 1e-9)), hi = helper_functions(zz * (1 + 1e-9));
    CHECK(lo.H == doctest::Approx(hi.H).epsilon(1e-7));
    CHECK(lo.J == doctest::Approx(hi.J).epsilon(1e-7));
  }
  const auto big = helper_functions(1e6);
  CHECK(big.I < 1e-5);
  CHECK(big.J == doctest::Approx(1e-6).epsilon(1e-5));
  CHECK_THROWS_AS(helper_functions(-1.0), std::invalid_argument);
}

TEST_CASE("two-factor closed forms match nested quadrature") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_params(rng);
    const double T = 0.25 + 1.75 * std::uniform_real_distribution<double>(0, 1)(rng), xi0 = 0.04;
    const auto a = two_factor_coeffs(p, T, xi0);
    const auto q = two_factor_by_quadrature(p, T, xi0);
    CHECK(a.c_x_xi == doctest::Approx(q.c_x_xi).epsilon(1e-6));
    CHECK(a.c_xi_xi == doctest::Approx(q.c_xi_xi).epsilon(1e-6));
    CHECK(a.c_mu == doctest::Approx(q.c_mu).epsilon(1e-6));
  }
}

TEST_CASE("two-factor degenerate cases") {
  TwoFactorParams p;
  p.theta = 0.0;
  const double T = 1.3, xi0 = 0.05;
  const auto c = two_factor_coeffs(p, T, xi0);
  CHECK(p.omega_y()[0] == 0.0);
  CHECK(c.c_x_xi == doctest::Approx(p.alpha_theta() * p.omega * std::pow(xi0, 1.5) * T * T * p.rho_sx *
                                    helper_functions(p.kappa_x * T).J));
  TwoFactorParams z;
  z.rho_sx = z.rho_sy = 0.0;
  const auto c0 = two_factor_coeffs(z, T, xi0);
  CHECK(c0.c_x_xi == 0.0);
  CHECK(c0.c_mu == 0.0);
  TwoFactorParams bad;
  bad.kappa_x = 0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("two-factor skew shape identities and limits") {
  TwoFactorParams p;
  const double C1 = two_factor_shape_constant_x(p), C2 = two_factor_shape_constant_y(p);
  for (double T : {0.01, 0.3, 2.0, 10.0}) {
    const double direct = C1 * (p.kappa_x * T - 1 + std::exp(-p.kappa_x * T)) / (T * T) +
                          C2 * (p.kappa_y * T - 1 + std::exp(-p.kappa_y * T)) / (T * T);
    CHECK(two_factor_skew_shape(p, T) == doctest::Approx(direct).epsilon(1e-9));
    const double viaJ = C1 * p.kappa_x * p.kappa_x * helper_functions(p.kappa_x * T).J +
                        C2 * p.kappa_y * p.kappa_y * helper_functions(p.kappa_y * T).J;
    CHECK(two_factor_skew_shape(p, T) == doctest::Approx(viaJ).epsilon(1e-12));
  }
  const double lim0 = (C1 * p.kappa_x * p.kappa_x + C2 * p.kappa_y * p.kappa_y) / 2;
  CHECK(two_factor_skew_shape(p, 1e-7) == doctest::Approx(lim0).epsilon(1e-6));
  const double Tbig = 1e5;
  CHECK(two_factor_skew_shape(p, Tbig) * Tbig == doctest::Approx(C1 * p.kappa_x + C2 * p.kappa_y).epsilon(1e-3));
  // first-order expansion skew equals the shape
  const double T = 0.7, xi0 = 0.04;
  const auto c = two_factor_coeffs(p, T, xi0);
  const double v = xi0 * T;
  const double first = std::sqrt(v / T) * c.c_x_xi / (2 * v * v);
  CHECK(first == doctest::Approx(two_factor_skew_shape(p, T)).epsilon(1e-12));
}

TEST_CASE("rBergomi functionals against closed forms") {
  ModelParams p;
  const double T = 0.8, a = p.alpha(), a1 = a + 1, xi0 = p.xi0;
  const double c2 = p.eta * p.eta * (2 * a + 1);
  const auto q = rbergomi_expansion_coeffs(p, T);
  CHECK(q.c_x_xi == doctest::Approx(rbergomi_c_x_xi_closed_form(p, T)).epsilon(1e-6));
  CHECK(q.c_xi_xi == doctest::Approx(c2 * xi0 * xi0 * std::pow(T, 2 * a + 3) / (a1 * a1 * (2 * a + 3))).epsilon(1e-6));
  const double mu = p.rho * p.rho * c2 * xi0 * xi0 * std::pow(T, 2 * a + 3) / (2 * a + 3) *
                    (1 / ((2 * a + 2) * a1) + boost::math::beta(a1, a1 + 1) / (2 * a1));
  CHECK(q.c_mu == doctest::Approx(mu).epsilon(1e-6));

  // C^{X xi} carries the sign of rho; its magnitude scales as T^{H + 3/2}
  const double s = (std::log(std::abs(rbergomi_c_x_xi_closed_form(p, 2.0))) -
                    std::log(std::abs(rbergomi_c_x_xi_closed_form(p, 0.5)))) /
                   std::log(4.0);
  CHECK(s == doctest::Approx(1.57).epsilon(1e-12));
  ModelParams z = p;
  z.rho = 0.0;
  const auto q0 = rbergomi_expansion_coeffs(z, T);
  CHECK(q0.c_x_xi == 0.0);
  CHECK(q0.c_mu == 0.0);
}
