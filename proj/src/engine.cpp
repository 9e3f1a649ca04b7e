#include "roughvol/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "roughvol/parallel.hpp"

namespace roughvol {

namespace {

constexpr std::size_t kBlock = 512;

template <class PerPath>
std::vector<double> run_blocks(std::size_t n_paths, int threads, PerPath&& make_worker) {
  if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
  std::vector<double> out(n_paths);
  parallel_for((n_paths + kBlock - 1) / kBlock, threads, [&](std::size_t b) {
    auto worker = make_worker();
    const std::size_t end = std::min(n_paths, (b + 1) * kBlock);
    for (std::size_t p = b * kBlock; p < end; ++p) out[p] = worker(p);
  });
  return out;
}

}  // namespace

std::vector<double> terminal_log_prices_rbergomi(const HybridPlan& plan, const ModelParams& params,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 int threads) {
  params.validate();
  if (std::abs(plan.alpha() - params.alpha()) > 1e-14)
    throw std::invalid_argument("rBergomi: plan alpha differs from the model parameters");
  const TimeGrid grid = plan.grid();
  const std::size_t N = grid.steps();
  const double dt = grid.dt();
  const double a1 = 2.0 * params.alpha() + 1.0;
  std::vector<double> comp(N + 1);
  for (std::size_t j = 0; j <= N; ++j)
    comp[j] = 0.5 * params.eta * params.eta * std::pow(grid.node(j), a1);

  return run_blocks(n_paths, threads, [&] {
    struct Worker {
      const HybridPlan& plan;
      const ModelParams& params;
      const std::vector<double>& comp;
      std::uint64_t seed;
      double dt;
      std::size_t N;
      ToeplitzConvolver::WorkspacePtr ws;
      std::vector<double> dW, dB, scratch, near, x, logs;

      double operator()(std::size_t p) {
        sample_path_increments(plan.grid(), params.rho, seed, p, dW, dB, scratch, near);
        plan.simulate_path(dB, near, x, *ws);
        // x becomes the variance path in place
        x[0] = params.xi0;
        for (std::size_t j = 1; j <= N; ++j) x[j] = params.xi0 * std::exp(params.eta * x[j] - comp[j]);
        log_price_path(x, dW, dt, logs);
        return logs[N];
      }
    };
    return Worker{plan,
                  params,
                  comp,
                  seed,
                  dt,
                  N,
                  plan.convolver().make_workspace(),
                  std::vector<double>(N),
                  std::vector<double>(N),
                  std::vector<double>(N),
                  std::vector<double>(plan.near_residual() == 0.0 ? 0 : N),
                  std::vector<double>(N + 1),
                  std::vector<double>(N + 1)};
  });
}

std::vector<double> terminal_log_prices_abergomi(const AbergomiPlan& plan, std::size_t n_paths,
                                                 std::uint64_t seed, int threads) {
  const TimeGrid grid = plan.grid();
  const std::size_t N = grid.steps();
  const double dt = grid.dt();
  const double rho = plan.config().params.rho;

  return run_blocks(n_paths, threads, [&] {
    struct Worker {
      const AbergomiPlan& plan;
      std::uint64_t seed;
      double rho;
      double dt;
      std::size_t N;
      std::vector<double> dW, dB, scratch, state, V, logs;

      double operator()(std::size_t p) {
        sample_path_increments(plan.grid(), rho, seed, p, dW, dB, scratch);
        plan.simulate_variance(dB, V, state);
        log_price_path(V, dW, dt, logs);
        return logs[N];
      }
    };
    return Worker{plan,
                  seed,
                  rho,
                  dt,
                  N,
                  std::vector<double>(N),
                  std::vector<double>(N),
                  std::vector<double>(N),
                  std::vector<double>(plan.terms()),
                  std::vector<double>(N + 1),
                  std::vector<double>(N + 1)};
  });
}

std::vector<double> terminal_log_prices_bs(const TimeGrid& grid, double vol, std::size_t n_paths,
                                           std::uint64_t seed, int threads) {
  if (!(vol >= 0.0) || !std::isfinite(vol))
    throw std::invalid_argument("Black-Scholes volatility must be non-negative");
  const std::size_t N = grid.steps();
  const double drift = -0.5 * vol * vol * grid.horizon();
  return run_blocks(n_paths, threads, [&] {
    struct Worker {
      const TimeGrid& grid;
      std::uint64_t seed;
      double vol, drift;
      std::vector<double> dW, dB, scratch;

      double operator()(std::size_t p) {
        // rho = 1 draws only the dW stream, which matches the other models' dW.
        sample_path_increments(grid, 1.0, seed, p, dW, dB, scratch);
        double w = 0.0;
        for (double d : dW) w += d;
        return vol * w + drift;
      }
    };
    return Worker{grid, seed, vol, drift, std::vector<double>(N), std::vector<double>(N),
                  std::vector<double>(N)};
  });
}

}  // namespace roughvol
