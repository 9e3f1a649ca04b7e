#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "roughvol/analytics.hpp"
#include "roughvol/engine.hpp"

using namespace roughvol;

TEST_CASE("Black-Scholes reference values and limits") {
  CHECK(std::abs(bs_price(1.0, 1.0, 1.0, 0.2) - 0.0796557) < 1e-7);
  CHECK(bs_price(1.2, 1.0, 1.0, 0.0) == doctest::Approx(0.2));
  CHECK(bs_price(0.8, 1.0, 1.0, 0.0) == 0.0);
  CHECK(bs_price(1.0, 1e-12, 1.0, 0.3) == doctest::Approx(1.0).epsilon(1e-10));
  // put-call parity with zero rates
  for (double K : {0.7, 1.0, 1.4})
    CHECK(bs_price(1.0, K, 0.5, 0.3) - bs_price(1.0, K, 0.5, 0.3, OptionType::put) == doctest::Approx(1.0 - K));
  CHECK_THROWS_AS(bs_price(-1.0, 1.0, 1.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(bs_price(1.0, 0.0, 1.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(bs_price(1.0, 1.0, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(bs_price(1.0, 1.0, 1.0, -0.2), std::invalid_argument);
}

TEST_CASE("implied vol round trip and bounds") {
  CHECK(std::abs(implied_vol(bs_price(1.0, 1.0, 1.0, 0.2), 1.0, 1.0, 1.0) - 0.2) < 1e-8);
  const double K = std::exp(0.4);
  const double p = bs_price(1.0, K, 0.25, 0.3);
  CHECK(p < 1e-3);
  CHECK(std::abs(implied_vol(p, 1.0, K, 0.25) - 0.3) < 1e-8);
  try {
    implied_vol(0.1, 1.2, 1.0, 1.0);  // below intrinsic 0.2
    FAIL("expected a bounds error");
  } catch (const ImpliedVolBoundsError& e) {
    CHECK(e.bound() == ImpliedVolBoundsError::Bound::lower);
  }
  try {
    implied_vol(1.0, 1.0, 1.0, 1.0);
    FAIL("expected a bounds error");
  } catch (const ImpliedVolBoundsError& e) {
    CHECK(e.bound() == ImpliedVolBoundsError::Bound::upper);
  }
  // puts use the put bounds
  const double put = bs_price(1.0, 1.1, 0.5, 0.25, OptionType::put);
  CHECK(std::abs(implied_vol(put, 1.0, 1.1, 0.5, OptionType::put) - 0.25) < 1e-8);
}

TEST_CASE("implied vol round trip on a coarse (K, T, vol) grid") {
  for (double K = 0.6; K <= 1.6001; K += 0.1)
    for (double T : {0.05, 0.5, 1.0, 3.0})
      for (double vol : {0.1, 0.3, 0.6, 1.0}) {
        const auto type = K < 1.0 ? OptionType::put : OptionType::call;
        const double p = bs_price(1.0, K, T, vol, type);
        CHECK(std::abs(implied_vol(p, 1.0, K, T, type) - vol) < 1e-8);
      }
}

TEST_CASE("log-moneyness grid default") {
  const auto k = log_moneyness_grid();
  REQUIRE(k.size() == 21);
  CHECK(k.front() == doctest::Approx(-0.2));
  CHECK(k[10] == doctest::Approx(0.0));
  CHECK(k.back() == doctest::Approx(0.2));
}

TEST_CASE("constant-variance smile is flat and stderr scales with paths") {
  const auto grid = make_time_grid(1.0, 10);
  const auto k = log_moneyness_grid();
  const auto logs = terminal_log_prices_bs(grid, 0.2, 40000, 17, 0);
  const auto s = mc_smile(logs, k, 1.0);
  REQUIRE(s.size() == 21);
  CHECK(s.skipped.empty());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double se = std::sqrt(s.vol_covariance[i * s.size() + i]);
    CHECK(std::abs(s.implied_vols[i] - 0.2) <= 3 * se);
    CHECK(s.implied_vols[i] > 0.0);
  }
  const auto half = mc_smile(terminal_log_prices_bs(grid, 0.2, 20000, 17, 0), k, 1.0);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < 21; ++i) a += half.stderrs[i], b += s.stderrs[i];
  CHECK(a / b == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("rBergomi smile slopes downward") {
  const auto grid = make_time_grid(1.0, 100);
  ModelParams p;
  HybridPlan plan(grid, p.alpha());
  const auto s = mc_smile(terminal_log_prices_rbergomi(plan, p, 20000, 5, 0), log_moneyness_grid(), 1.0);
  REQUIRE(s.size() == 21);
  // the far call wing is flat and noisy at this path count, so monotonicity is checked up to k = 0.1
  for (std::size_t i = 1; i < s.size() && s.log_moneyness[i] <= 0.1 + 1e-12; ++i)
    CHECK(s.implied_vols[i] < s.implied_vols[i - 1]);
  CHECK(s.implied_vols.front() > s.implied_vols[10]);
  CHECK(s.implied_vols[10] > s.implied_vols.back());
}

TEST_CASE("strikes with no payoff are skipped and reported") {
  std::vector<double> logs(100, 0.0);
  const auto s = mc_smile(logs, {-0.1, 0.1}, 1.0);
  CHECK(s.size() == 0);
  CHECK(s.skipped.size() == 2);
}

TEST_CASE("smile_rmse is a metric on a grid") {
  SmileResult a;
  a.maturity = 1.0;
  a.log_moneyness = {-0.1, 0.0, 0.1};
  a.strikes = {std::exp(-0.1), 1.0, std::exp(0.1)};
  a.implied_vols = {0.25, 0.2, 0.18};
  auto b = a, c = a;
  for (double& v : b.implied_vols) v += 0.01;
  c.implied_vols = {0.3, 0.19, 0.2};
  CHECK(smile_rmse(a, a) == 0.0);
  CHECK(smile_rmse(a, b) == doctest::Approx(0.01));
  CHECK(smile_rmse(a, c) == smile_rmse(c, a));
  CHECK(smile_rmse(a, c) <= smile_rmse(a, b) + smile_rmse(b, c) + 1e-15);
  auto d = a;
  d.maturity = 2.0;
  CHECK_THROWS_AS(smile_rmse(a, d), std::invalid_argument);
  d = a;
  d.log_moneyness[2] = 0.2;
  CHECK_THROWS_AS(smile_rmse(a, d), std::invalid_argument);
}

TEST_CASE("scale_smile multiplies vols and reprices") {
  SmileResult a;
  a.maturity = 1.0;
  a.log_moneyness = {-0.1, 0.1};
  a.strikes = {std::exp(-0.1), std::exp(0.1)};
  a.implied_vols = {0.25, 0.2};
  a.prices = {0.0, 0.0};
  a.stderrs = {0.0, 0.0};
  a.vol_covariance = {1e-6, 0, 0, 1e-6};
  const auto s = scale_smile(a, 0.5);
  CHECK(s.implied_vols[0] == doctest::Approx(0.125));
  CHECK(s.vol_covariance[0] == doctest::Approx(0.25e-6));
  CHECK(s.prices[1] == doctest::Approx(bs_price(1.0, std::exp(0.1), 1.0, 0.1)));
}

TEST_CASE("atm_skew on the analytic expansion reproduces S_T") {
  const ExpansionCoeffs c{-0.002, 0.003, 0.001};
  const double xi0 = 0.04;
  SmileFunction fn = [&](double T, const std::vector<double>& k) {
    SmileResult s;
    s.maturity = T;
    for (double x : k) {
      s.log_moneyness.push_back(x);
      s.strikes.push_back(std::exp(x));
      s.implied_vols.push_back(sigma_bs_expansion(c, xi0 * T, T, x));
      s.prices.push_back(0.0);
      s.stderrs.push_back(0.0);
    }
    s.vol_covariance.assign(k.size() * k.size(), 0.0);
    return s;
  };
  const std::vector<double> Ts{0.5, 1.0, 2.0};
  const auto r = atm_skew(fn, Ts);
  for (std::size_t i = 0; i < 3; ++i) {
    const double S = expansion_terms(c, xi0 * Ts[i], Ts[i]).skew;
    CHECK(r.psi[i] == doctest::Approx(std::abs(S)).epsilon(1e-6));
    CHECK(r.psi_half[i] == doctest::Approx(std::abs(S)).epsilon(1e-6));
    CHECK_FALSE(r.flagged[i]);
  }
  CHECK(r.fit_valid);
  CHECK_THROWS_AS(atm_skew(fn, {0.5, 1.0}), std::invalid_argument);
}

TEST_CASE("flat Black-Scholes smile gives no usable skew") {
  SmileFunction fn = [](double T, const std::vector<double>& k) {
    const auto grid = make_time_grid(T, 10);
    return mc_smile(terminal_log_prices_bs(grid, 0.2, 20000, 3, 0), k, T);
  };
  const auto r = atm_skew(fn, {0.25, 0.5, 1.0});
  for (bool f : r.flagged) CHECK(f);
  CHECK_FALSE(r.fit_valid);
}

TEST_CASE("expansion: zero coefficients and first-order form") {
  const double v = 0.03, T = 0.8;
  const ExpansionCoeffs zero{};
  for (double k : {-0.2, 0.0, 0.3}) CHECK(sigma_bs_expansion(zero, v, T, k) == doctest::Approx(std::sqrt(v / T)));
  ModelParams p;
  const double cx = rbergomi_c_x_xi_closed_form(p, T);
  const ExpansionCoeffs first{cx, 0.0, 0.0};
  const double vs = std::sqrt(v / T);
  // second-order terms in cx^2 are removed by taking the epsilon -> 0 slope
  const double eps = 1e-4;
  for (double k : {-0.1, 0.2}) {
    const double d = (sigma_bs_expansion(first, v, T, k, eps) - vs) / eps;
    CHECK(d == doctest::Approx((1 / (4 * v) + k / (2 * v * v)) * cx * vs).epsilon(1e-3));
  }
  const ExpansionCoeffs c{0.001, 0.002, -0.0005};
  const auto t = expansion_terms(c, v, T);
  const double h = 1e-6;
  CHECK((sigma_bs_expansion(c, v, T, h) - sigma_bs_expansion(c, v, T, -h)) / (2 * h) ==
        doctest::Approx(t.skew).epsilon(1e-8));
}

TEST_CASE("common_strikes keeps the shared strikes and records the rest") {
  const auto grid = make_time_grid(1.0, 20);
  const auto logs = terminal_log_prices_bs(grid, 0.2, 5000, 3);
  const auto a = mc_smile(logs, {-0.2, -0.1, 0.0, 0.1}, 1.0);
  const auto b = mc_smile(logs, {-0.1, 0.0, 0.1, 0.2}, 1.0);
  const auto [x, y] = common_strikes(a, b);
  REQUIRE(x.size() == 3);
  REQUIRE(y.size() == 3);
  CHECK(smile_rmse(x, y) == 0.0);
  CHECK(x.vol_covariance.size() == 9);
  CHECK(x.skipped.size() == a.skipped.size() + 1);
  CHECK(x.vol_difference_stderr(0, 2) == doctest::Approx(a.vol_difference_stderr(1, 3)));
}
