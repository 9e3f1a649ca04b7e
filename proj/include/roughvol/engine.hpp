#pragma once

// Streaming Monte Carlo drivers that keep only terminal log-prices. Paths are
// generated block by block, each from its own (seed, path) stream, so the
// output is identical for any thread count and the same seed gives common
// random numbers across models on the same grid and correlation.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "roughvol/hybrid_scheme.hpp"
#include "roughvol/models.hpp"
#include "roughvol/sim_core.hpp"

namespace roughvol {

/// log S_T per path for rBergomi via the hybrid scheme.
std::vector<double> terminal_log_prices_rbergomi(const HybridPlan& plan, const ModelParams& params,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 int threads = 1);

/// log S_T per path for aBergomi; the price correlation comes from plan.config().params.rho.
std::vector<double> terminal_log_prices_abergomi(const AbergomiPlan& plan, std::size_t n_paths,
                                                 std::uint64_t seed, int threads = 1);

/// log S_T = vol W_T - vol^2 T / 2, using the same dW streams as the other models.
std::vector<double> terminal_log_prices_bs(const TimeGrid& grid, double vol, std::size_t n_paths,
                                           std::uint64_t seed, int threads = 1);

}  // namespace roughvol
