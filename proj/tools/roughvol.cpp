#include <CLI11.hpp>

#include <iostream>

#include "roughvol/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rough Bergomi and approximate Bergomi Monte Carlo experiments"};
  app.require_subcommand(1);

  roughvol::cli::CommandOptions opt;
  std::uint64_t seed = 0;
  int threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (0 = auto)");
  app.add_option("--config", opt.config_path, "JSON configuration file");
  app.add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
  app.fallthrough();

  for (const char* name : {"simulate", "fit-kernel", "smile", "compare", "skew"}) app.add_subcommand(name);
  app.get_subcommand("simulate")->description("Terminal log-prices and a summary");
  app.get_subcommand("fit-kernel")->description("Sum-of-exponentials kernel for the Volterra kernel");
  app.get_subcommand("smile")->description("Implied-volatility smiles per model and step count");
  app.get_subcommand("compare")->description("Smile RMSE of aBergomi against rBergomi");
  app.get_subcommand("skew")->description("ATM skew term structure and power-law fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : roughvol::cli::kSchema;
  }
  if (*seed_opt) opt.seed = seed;
  if (*threads_opt) opt.threads = threads;
  return roughvol::cli::run_command(app.get_subcommands().front()->get_name(), opt, std::cout, std::cerr);
}
