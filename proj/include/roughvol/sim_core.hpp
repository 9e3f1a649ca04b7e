#pragma once

// Time grids, model parameters, per-path random streams and correlated
// Brownian increments. Everything downstream consumes increments, never
// Brownian levels.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace roughvol {

/// Uniform grid t_j = j*dt on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  /// t_j; node(steps()) returns the horizon exactly.
  double node(std::size_t j) const noexcept {
    return j == steps_ ? horizon_ : static_cast<double>(j) * dt_;
  }
  std::vector<double> nodes() const;

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
    return a.horizon_ == b.horizon_ && a.steps_ == b.steps_;
  }

 private:
  double horizon_;
  std::size_t steps_;
  double dt_;
};

/// Requires T > 0 and N >= 2.
TimeGrid make_time_grid(double T, std::size_t N);

/// rBergomi parameters under a flat initial forward-variance curve.
struct ModelParams {
  double xi0 = 0.026;
  double eta = 1.9;
  double H = 0.07;
  double rho = -0.9;

  double alpha() const noexcept { return H - 0.5; }
  /// eta * sqrt(2*alpha + 1)
  double sigma() const noexcept;

  /// Throws std::invalid_argument unless xi0 > 0, eta > 0, H in (0, 1/2)
  /// and |rho| <= 1.
  void validate() const;
};

/// Dense row-major matrix; rows are paths, columns are time indices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A reproducible Gaussian stream for one path index.
///
/// The engine is std::mt19937_64 seeded with splitmix64(seed, path). Normals
/// come from std::normal_distribution, which libstdc++ implements with the
/// Marsaglia polar method (exact distribution). A path's draws depend only
/// on (seed, path), never on which thread produced them.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path);
  /// Fills out with independent N(0, stddev^2) draws.
  void fill_normal(std::span<double> out, double stddev);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Price-driving (dW) and variance-driving (dB) increments for the block of
/// paths [first_path, first_path + n_paths).
struct PathIncrements {
  TimeGrid grid;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::size_t first_path = 0;
  Matrix dW;  // [n_paths x N]
  Matrix dB;  // [n_paths x N]
  Matrix near;  // [n_paths x N] unit normals independent of dW and dB, for the hybrid near cell

  std::size_t n_paths() const noexcept { return dW.rows(); }
};

/// dB = rho*dW + sqrt(1 - rho^2)*dZ with dW, dZ independent N(0, dt).
/// Path p draws N values for dW, N values for dZ and then N unit normals for
/// `near` from PathRng(seed, p), so any sub-block reproduces the corresponding
/// rows of a larger request.
PathIncrements sample_correlated_increments(const TimeGrid& grid, double rho,
                                            std::size_t n_paths, std::uint64_t seed,
                                            std::size_t first_path = 0, int threads = 1);

/// Row-level variant used by the streaming engine: fills one path's increments.
/// `near` is filled only when non-empty; the dW and dB draws do not depend on it.
void sample_path_increments(const TimeGrid& grid, double rho, std::uint64_t seed,
                            std::size_t path, std::span<double> dW, std::span<double> dB,
                            std::span<double> scratch, std::span<double> near = {});

}  // namespace roughvol
