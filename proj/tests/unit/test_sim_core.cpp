#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "roughvol/sim_core.hpp"

using namespace roughvol;

namespace {

struct ColumnStats {
  double mean, var, corr;
};

ColumnStats column_stats(const PathIncrements& inc, std::size_t j) {
  const double n = static_cast<double>(inc.n_paths());
  double sw = 0, sb = 0, sww = 0, sbb = 0, swb = 0;
  for (std::size_t p = 0; p < inc.n_paths(); ++p) {
    const double w = inc.dW(p, j), b = inc.dB(p, j);
    sw += w;
    sb += b;
    sww += w * w;
    sbb += b * b;
    swb += w * b;
  }
  const double mw = sw / n, mb = sb / n;
  const double vw = sww / n - mw * mw, vb = sbb / n - mb * mb;
  return {mw, vw, (swb / n - mw * mb) / std::sqrt(vw * vb)};
}

}  // namespace

TEST_CASE("time grid arithmetic") {
  const auto g = make_time_grid(1.0, 100);
  CHECK(g.dt() == doctest::Approx(0.01));
  CHECK(g.node(50) == doctest::Approx(0.5));
  CHECK(g.node(100) == 1.0);
  const auto g2 = make_time_grid(2.0, 200);
  CHECK(g2.dt() == doctest::Approx(0.01));
  CHECK(g2.node(200) == 2.0);
  const auto nodes = g2.nodes();
  REQUIRE(nodes.size() == 201);
  CHECK(nodes.front() == 0.0);
  for (std::size_t j = 1; j < nodes.size(); ++j) CHECK(nodes[j] > nodes[j - 1]);
  CHECK(std::abs(g2.dt() * 200 - 2.0) <= 2.0 * 2.2e-16 * 2.0);
}

TEST_CASE("time grid preconditions") {
  CHECK_THROWS_AS(make_time_grid(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_time_grid(0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_time_grid(-1.0, 10), std::invalid_argument);
}

TEST_CASE("model parameter validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.alpha() == doctest::Approx(-0.43));
  CHECK(p.sigma() == doctest::Approx(1.9 * std::sqrt(0.14)));
  ModelParams bad = p;
  bad.H = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.rho = 1.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.xi0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("rho = 1 gives dB equal to dW") {
  const auto inc = sample_correlated_increments(make_time_grid(1.0, 16), 1.0, 50, 7);
  for (std::size_t p = 0; p < 50; ++p)
    for (std::size_t j = 0; j < 16; ++j) CHECK(inc.dB(p, j) == inc.dW(p, j));
}

TEST_CASE("rho out of range is rejected") {
  CHECK_THROWS_AS(sample_correlated_increments(make_time_grid(1.0, 4), 1.01, 10, 1), std::invalid_argument);
}

TEST_CASE("column moments and correlation at 1e5 paths") {
  const auto grid = make_time_grid(1.0, 4);
  for (double rho : {0.0, -0.9}) {
    const auto inc = sample_correlated_increments(grid, rho, 100000, 123, 0, 4);
    const double n = 1e5, dt = grid.dt();
    for (std::size_t j = 0; j < 4; ++j) {
      const auto s = column_stats(inc, j);
      CHECK(std::abs(s.mean) <= 4.0 * std::sqrt(dt / n));
      CHECK(std::abs(s.var / dt - 1.0) < 0.05);
      CHECK(std::abs(s.corr - rho) < 0.02);
    }
  }
}

TEST_CASE("increments are independent of thread count and block split") {
  const auto grid = make_time_grid(1.0, 32);
  const auto a = sample_correlated_increments(grid, -0.7, 300, 99, 0, 1);
  const auto b = sample_correlated_increments(grid, -0.7, 300, 99, 0, 8);
  const auto c = sample_correlated_increments(grid, -0.7, 100, 99, 150, 3);
  for (std::size_t p = 0; p < 300; ++p)
    for (std::size_t j = 0; j < 32; ++j) {
      CHECK(a.dW(p, j) == b.dW(p, j));
      CHECK(a.dB(p, j) == b.dB(p, j));
    }
  for (std::size_t p = 0; p < 100; ++p)
    for (std::size_t j = 0; j < 32; ++j) CHECK(c.dB(p, j) == a.dB(p + 150, j));
}

TEST_CASE("different seeds give different streams") {
  const auto grid = make_time_grid(1.0, 8);
  const auto a = sample_correlated_increments(grid, 0.0, 2, 1);
  const auto b = sample_correlated_increments(grid, 0.0, 2, 2);
  CHECK(a.dW(0, 0) != b.dW(0, 0));
  CHECK(a.dW(0, 0) != a.dW(1, 0));
}
