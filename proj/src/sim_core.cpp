#include "roughvol/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "roughvol/parallel.hpp"
#include "roughvol/simd.hpp"

namespace roughvol {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("time grid horizon must be positive and finite");
  if (steps < 1) throw std::invalid_argument("time grid needs at least one step");
  dt_ = horizon / static_cast<double>(steps);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> t(steps_ + 1);
  for (std::size_t j = 0; j <= steps_; ++j) t[j] = node(j);
  return t;
}

TimeGrid make_time_grid(double T, std::size_t N) {
  if (N < 2) throw std::invalid_argument("time grid needs N >= 2, got " + std::to_string(N));
  return TimeGrid(T, N);
}

double ModelParams::sigma() const noexcept { return eta * std::sqrt(2.0 * alpha() + 1.0); }

void ModelParams::validate() const {
  if (!(xi0 > 0.0)) throw std::invalid_argument("xi0 must be positive");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(H > 0.0 && H < 0.5)) throw std::invalid_argument("H must lie in (0, 1/2)");
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t path)
    : engine_(splitmix64(splitmix64(seed) ^ (path * 0xD1B54A32D192ED03ULL + 1))) {}

void PathRng::fill_normal(std::span<double> out, double stddev) {
  for (double& v : out) v = stddev * normal_(engine_);
}

void sample_path_increments(const TimeGrid& grid, double rho, std::uint64_t seed,
                            std::size_t path, std::span<double> dW, std::span<double> dB,
                            std::span<double> scratch, std::span<double> near) {
  const std::size_t N = grid.steps();
  const double sd = std::sqrt(grid.dt());
  PathRng rng(seed, path);
  rng.fill_normal(dW.first(N), sd);
  // dZ is drawn even when rho = 1 so the near stream sits at the same offset
  rng.fill_normal(scratch.first(N), sd);
  if (rho == 1.0)
    std::copy_n(dW.begin(), N, dB.begin());
  else
    simd::kernels().correlate(dW.data(), scratch.data(), rho, std::sqrt(1.0 - rho * rho),
                              dB.data(), N);
  if (!near.empty()) rng.fill_normal(near.first(N), 1.0);
}

PathIncrements sample_correlated_increments(const TimeGrid& grid, double rho,
                                            std::size_t n_paths, std::uint64_t seed,
                                            std::size_t first_path, int threads) {
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
  if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
  const std::size_t N = grid.steps();
  PathIncrements inc{grid, rho, seed, first_path, Matrix(n_paths, N), Matrix(n_paths, N),
                     Matrix(n_paths, N)};

  constexpr std::size_t block = 256;
  const std::size_t n_blocks = (n_paths + block - 1) / block;
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    std::vector<double> scratch(N);
    const std::size_t end = std::min(n_paths, (b + 1) * block);
    for (std::size_t p = b * block; p < end; ++p)
      sample_path_increments(grid, rho, seed, first_path + p, inc.dW.row(p), inc.dB.row(p),
                             scratch, inc.near.row(p));
  });
  return inc;
}

}  // namespace roughvol
