#include "roughvol/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <unistd.h>

#include "roughvol/analytics.hpp"
#include "roughvol/engine.hpp"
#include "roughvol/hybrid_scheme.hpp"
#include "roughvol/kernel.hpp"
#include "roughvol/models.hpp"
#include "roughvol/parallel.hpp"
#include "roughvol/simd.hpp"

namespace roughvol::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into place: " + target.string());
  }
}

std::string run_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("threads");
  return config_hash(j);
}

namespace {

struct Context {
  RunConfig cfg;
  json doc;  // as supplied, before defaults
  std::string hash;
  fs::path out_dir;
  int threads = 1;
  std::ostream& log;
};

std::string comment_line(const Context& ctx) {
  return "# config_hash=" + ctx.hash + " seed=" + std::to_string(ctx.cfg.seed) + "\n";
}

json envelope(const Context& ctx, const std::string& command) {
  json j;
  j["command"] = command;
  j["config_hash"] = ctx.hash;
  j["seed"] = ctx.cfg.seed;
  json c = to_json(ctx.cfg);
  c.erase("threads");
  j["config"] = c;
  return j;
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  write_file_atomic((ctx.out_dir / name).string(), j.dump(2) + "\n");
  ctx.log << "wrote " << (ctx.out_dir / name).string() << "\n";
}

void write_text(const Context& ctx, const std::string& name, const std::string& body) {
  write_file_atomic((ctx.out_dir / name).string(), body);
  ctx.log << "wrote " << (ctx.out_dir / name).string() << "\n";
}

// Median wall time of cfg.repetitions runs of `body`; the result of the last run is kept.
template <class Body>
std::pair<double, std::vector<double>> timed(int repetitions, Body&& body) {
  std::vector<double> times;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  return {median, times};
}

struct BuiltKernel {
  ExpKernel kernel;
  std::string method;
  std::size_t n_grid;
  double rmse;
  double l2_error;
  std::optional<double> bound;
  bool converged;
  int iterations;
  double gradient_norm;
};

// Kernel approximating sqrt(2a+1) tau^a on [0, T].
BuiltKernel build_kernel(const KernelSpec& spec, std::size_t n, double H, double T, std::size_t n_grid) {
  const double norm = std::sqrt(2.0 * H);
  if (spec.method == KernelMethod::closed_form) {
    const auto cf = closed_form_kernel(n, H, T);
    ExpKernel k = cf.kernel.scaled(norm);
    const double rmse = grid_rmse(k, H, T, n_grid);
    return {std::move(k), "closed-form", n_grid, rmse, cf.cert.l2_error, cf.cert.bound, true, 0, 0.0};
  }
  const ExpKernel init = initial_kernel_guess(H, T, n_grid, n);
  FitOptions opt;
  opt.max_iterations = spec.max_iterations;
  opt.subgrid_weight = spec.subgrid_weight;
  bool converged = true;
  KernelFit fit = [&] {
    try {
      return fit_kernel_ls(H, T, n_grid, n, init, opt);
    } catch (const FitFailure& f) {
      converged = false;
      return f.best();
    }
  }();
  const double l2 = kernel_l2_error(fit.kernel, H, T, 400, norm);
  return {fit.kernel, "least-squares", n_grid, fit.rmse, l2, std::nullopt, converged, fit.iterations,
          fit.gradient_norm};
}

json kernel_json(const BuiltKernel& b, double H, double T) {
  json j;
  j["weights"] = b.kernel.weights();
  j["speeds"] = b.kernel.speeds();
  j["H"] = H;
  j["T"] = T;
  j["n"] = b.kernel.size();
  j["N_grid"] = b.n_grid;
  j["method"] = b.method;
  j["rmse"] = b.rmse;
  j["l2_error"] = b.l2_error;
  j["bound"] = b.bound ? json(*b.bound) : json(nullptr);
  if (b.bound) j["bound_satisfied"] = b.l2_error <= *b.bound;
  j["converged"] = b.converged;
  j["iterations"] = b.iterations;
  j["gradient_norm"] = b.gradient_norm;
  return j;
}

std::string smile_csv(const Context& ctx, const SmileResult& s) {
  std::string out = comment_line(ctx);
  out += "log_moneyness,strike,implied_vol,price,stderr\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(s.log_moneyness[i]) + "," + format_double(s.strikes[i]) + "," +
           format_double(s.implied_vols[i]) + "," + format_double(s.prices[i]) + "," +
           format_double(s.stderrs[i]) + "\n";
  }
  return out;
}

double mult_factor_for(const AbergomiSpec& a, std::size_t steps) {
  return a.table_factor ? std::sqrt(table2_mult_factor_squared(steps)) : a.mult_factor;
}

AbergomiConfig abergomi_setup(const RunConfig& cfg, const ExpKernel& kernel, const TimeGrid& grid) {
  AbergomiConfig ac = make_abergomi_config(kernel, cfg.params, grid);
  if (cfg.abergomi.theta) ac.theta = *cfg.abergomi.theta;
  ac.mult_factor = mult_factor_for(cfg.abergomi, grid.steps());
  ac.placement = cfg.abergomi.placement;
  ac.exact_compensator = cfg.abergomi.exact_compensator;
  ac.stepping = cfg.abergomi.stepping;
  ac.validate();
  return ac;
}

struct Sampled {
  std::vector<double> log_prices;
  double runtime;
  std::vector<double> runtimes;
};

Sampled sample_rbergomi(const Context& ctx, const TimeGrid& grid) {
  Sampled s;
  auto [med, all] = timed(ctx.cfg.repetitions, [&] {
    HybridPlan plan(grid, ctx.cfg.params.alpha(), ctx.cfg.near_field);
    s.log_prices = terminal_log_prices_rbergomi(plan, ctx.cfg.params, ctx.cfg.paths, ctx.cfg.seed, ctx.threads);
  });
  s.runtime = med;
  s.runtimes = all;
  return s;
}

Sampled sample_abergomi(const Context& ctx, const AbergomiConfig& ac, const TimeGrid& grid) {
  Sampled s;
  auto [med, all] = timed(ctx.cfg.repetitions, [&] {
    AbergomiPlan plan(ac, grid);
    s.log_prices = terminal_log_prices_abergomi(plan, ctx.cfg.paths, ctx.cfg.seed, ctx.threads);
  });
  s.runtime = med;
  s.runtimes = all;
  return s;
}

Sampled sample_bs(const Context& ctx, const TimeGrid& grid) {
  Sampled s;
  auto [med, all] = timed(ctx.cfg.repetitions, [&] {
    s.log_prices = terminal_log_prices_bs(grid, ctx.cfg.bs_vol, ctx.cfg.paths, ctx.cfg.seed, ctx.threads);
  });
  s.runtime = med;
  s.runtimes = all;
  return s;
}

std::size_t kernel_grid(const RunConfig& cfg, std::size_t steps) {
  return cfg.kernel.n_grid ? cfg.kernel.n_grid : steps;
}

void warn_unconverged(const Context& ctx, const BuiltKernel& b) {
  if (!b.converged)
    ctx.log << "warning: kernel fit (n=" << b.kernel.size() << ", N_grid=" << b.n_grid
            << ") did not converge; using best iterate, rmse=" << b.rmse << "\n";
}

// Analytic two-factor smile from the second-order expansion.
SmileResult bergomi2f_smile(const RunConfig& cfg, double T, const std::vector<double>& k) {
  const auto c = two_factor_coeffs(cfg.bergomi2f, T, cfg.params.xi0);
  const double v = cfg.params.xi0 * T;
  SmileResult s;
  s.maturity = T;
  s.model = "bergomi2f";
  for (double x : k) {
    const double iv = sigma_bs_expansion(c, v, T, x);
    if (!(iv > 0.0)) {
      s.skipped.push_back({x, "expansion gives a non-positive volatility"});
      continue;
    }
    const double K = std::exp(x);
    s.log_moneyness.push_back(x);
    s.strikes.push_back(K);
    s.implied_vols.push_back(iv);
    s.prices.push_back(bs_price(1.0, K, T, iv, x < 0.0 ? OptionType::put : OptionType::call));
    s.stderrs.push_back(0.0);
  }
  s.vol_covariance.assign(s.size() * s.size(), 0.0);
  return s;
}

json skipped_json(const SmileResult& s) {
  json a = json::array();
  for (const auto& sk : s.skipped) a.push_back({{"log_moneyness", sk.log_moneyness}, {"reason", sk.reason}});
  return a;
}

// ---------------------------------------------------------------------------

int cmd_simulate(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  if (cfg.model == "bergomi2f")
    throw SchemaError({"model: simulate supports rbergomi, abergomi and bs (bergomi2f is analytic only)"});
  const TimeGrid grid = make_time_grid(cfg.T, cfg.steps);

  json summary = envelope(ctx, "simulate");
  Sampled s;
  if (cfg.model == "rbergomi") {
    s = sample_rbergomi(ctx, grid);
  } else if (cfg.model == "abergomi") {
    const auto bk = build_kernel(cfg.kernel, cfg.kernel.n, cfg.params.H, cfg.T, kernel_grid(cfg, cfg.steps));
    warn_unconverged(ctx, bk);
    const auto ac = abergomi_setup(cfg, bk.kernel, grid);
    s = sample_abergomi(ctx, ac, grid);
    summary["kernel"] = kernel_json(bk, cfg.params.H, cfg.T);
    summary["mult_factor"] = ac.mult_factor;
    summary["theta"] = ac.theta;
  } else {
    s = sample_bs(ctx, grid);
  }

  const double n = static_cast<double>(s.log_prices.size());
  double m = 0.0, m2 = 0.0, e = 0.0, e2 = 0.0;
  for (double x : s.log_prices) {
    m += x;
    m2 += x * x;
    const double S = std::exp(x);
    e += S;
    e2 += S * S;
  }
  m /= n;
  e /= n;
  const double var = n > 1 ? (m2 / n - m * m) * n / (n - 1.0) : 0.0;
  const double var_s = n > 1 ? (e2 / n - e * e) * n / (n - 1.0) : 0.0;

  std::string csv = comment_line(ctx);
  csv += "path,log_price\n";
  for (std::size_t p = 0; p < s.log_prices.size(); ++p)
    csv += std::to_string(p) + "," + format_double(s.log_prices[p]) + "\n";
  write_text(ctx, "terminal_" + cfg.model + ".csv", csv);

  summary["model"] = cfg.model;
  summary["paths"] = cfg.paths;
  summary["steps"] = cfg.steps;
  summary["T"] = cfg.T;
  summary["mean_log_price"] = m;
  summary["var_log_price"] = var;
  summary["mean_price"] = e;
  summary["mean_price_stderr"] = std::sqrt(std::max(var_s, 0.0) / n);
  summary["runtime_seconds"] = s.runtime;
  summary["runtimes"] = s.runtimes;
  summary["threads"] = ctx.threads;
  summary["isa"] = std::string(simd::isa_name(simd::kernels().isa));
  write_json(ctx, "summary_simulate_" + cfg.model + ".json", summary);
  return kOk;
}

int cmd_fit_kernel(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const std::size_t n_grid = kernel_grid(cfg, cfg.steps);
  BuiltKernel bk = build_kernel(cfg.kernel, cfg.kernel.n, cfg.params.H, cfg.T, n_grid);
  json j = envelope(ctx, "fit-kernel");
  j.update(kernel_json(bk, cfg.params.H, cfg.T));
  const std::string name = std::string("kernel_") + bk.method + "_n" + std::to_string(cfg.kernel.n) + ".json";
  write_json(ctx, name, j);
  if (!bk.converged) {
    ctx.log << "error: least-squares fit did not converge; best iterate written (rmse=" << bk.rmse << ")\n";
    return kNumeric;
  }
  if (bk.bound && !(bk.l2_error <= *bk.bound)) {
    ctx.log << "error: closed-form L2 error " << bk.l2_error << " exceeds bound " << *bk.bound << "\n";
    return kNumeric;
  }
  ctx.log << bk.method << " kernel n=" << cfg.kernel.n << " rmse=" << bk.rmse << " l2_error=" << bk.l2_error
          << "\n";
  return kOk;
}

int cmd_smile(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto k = log_moneyness_grid(cfg.strikes.k_min, cfg.strikes.k_max, cfg.strikes.count);
  json summary = envelope(ctx, "smile");
  summary["strikes"] = {{"k_min", cfg.strikes.k_min},
                        {"k_max", cfg.strikes.k_max},
                        {"count", cfg.strikes.count},
                        {"log_moneyness", k},
                        {"defaulted", !ctx.doc.contains("strikes")}};
  json files = json::array();

  for (const auto& model : cfg.smile.models) {
    if (model == "bergomi2f") {
      SmileResult s = bergomi2f_smile(cfg, cfg.T, k);
      const std::string name = "smile_bergomi2f_T" + format_double(cfg.T) + ".csv";
      write_text(ctx, name, smile_csv(ctx, s));
      files.push_back({{"file", name}, {"model", model}, {"T", cfg.T}, {"skipped", skipped_json(s)}});
      continue;
    }
    for (std::size_t N : cfg.smile.steps) {
      const TimeGrid grid = make_time_grid(cfg.T, N);
      json entry{{"model", model}, {"T", cfg.T}, {"steps", N}};
      Sampled smp;
      double scale = 1.0;
      if (model == "rbergomi") {
        smp = sample_rbergomi(ctx, grid);
      } else if (model == "bs") {
        smp = sample_bs(ctx, grid);
      } else {
        const auto bk = build_kernel(cfg.kernel, cfg.kernel.n, cfg.params.H, cfg.T, kernel_grid(cfg, N));
        warn_unconverged(ctx, bk);
        const auto ac = abergomi_setup(cfg, bk.kernel, grid);
        smp = sample_abergomi(ctx, ac, grid);
        if (ac.placement == MultPlacement::smile) scale = ac.mult_factor;
        entry["mult_factor"] = ac.mult_factor;
        entry["kernel_rmse"] = bk.rmse;
        entry["kernel_converged"] = bk.converged;
      }
      SmileResult s = mc_smile(smp.log_prices, k, cfg.T);
      if (scale != 1.0) s = scale_smile(std::move(s), scale);
      const std::string name = "smile_" + model + "_T" + format_double(cfg.T) + "_N" + std::to_string(N) + ".csv";
      write_text(ctx, name, smile_csv(ctx, s));
      entry["file"] = name;
      entry["runtime_seconds"] = smp.runtime;
      entry["skipped"] = skipped_json(s);
      files.push_back(entry);
    }
  }
  summary["files"] = files;
  summary["paths"] = cfg.paths;
  summary["threads"] = ctx.threads;
  write_json(ctx, "summary_smile.json", summary);
  return kOk;
}

int cmd_compare(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto k = log_moneyness_grid(cfg.strikes.k_min, cfg.strikes.k_max, cfg.strikes.count);
  std::string csv = comment_line(ctx);
  csv += "terms,steps,mult_factor_squared,rmse,runtime_rbergomi,runtime_abergomi,kernel_converged\n";
  json rows = json::array();

  for (std::size_t N : cfg.compare.steps) {
    const TimeGrid grid = make_time_grid(cfg.T, N);
    const Sampled ref = sample_rbergomi(ctx, grid);
    const SmileResult ref_smile = mc_smile(ref.log_prices, k, cfg.T);
    for (std::size_t n : cfg.compare.terms) {
      const auto bk = build_kernel(cfg.kernel, n, cfg.params.H, cfg.T, kernel_grid(cfg, N));
      warn_unconverged(ctx, bk);
      const auto ac = abergomi_setup(cfg, bk.kernel, grid);
      const Sampled a = sample_abergomi(ctx, ac, grid);
      SmileResult s = mc_smile(a.log_prices, k, cfg.T);
      if (ac.placement == MultPlacement::smile) s = scale_smile(std::move(s), ac.mult_factor);
      const auto [ra, rb] = common_strikes(ref_smile, s);
      const double rmse = smile_rmse(ra, rb);
      const double m2 = ac.mult_factor * ac.mult_factor;
      csv += std::to_string(n) + "," + std::to_string(N) + "," + format_double(m2) + "," + format_double(rmse) +
             "," + format_double(ref.runtime) + "," + format_double(a.runtime) + "," +
             (bk.converged ? "1" : "0") + "\n";
      rows.push_back({{"terms", n},
                      {"steps", N},
                      {"mult_factor_squared", m2},
                      {"rmse", rmse},
                      {"runtime_rbergomi", ref.runtime},
                      {"runtime_abergomi", a.runtime},
                      {"kernel_rmse", bk.rmse},
                      {"strikes_used", ra.size()},
                      {"kernel_converged", bk.converged}});
      ctx.log << "n=" << n << " N=" << N << " rmse=" << rmse << "\n";
    }
  }
  write_text(ctx, "compare.csv", csv);
  json summary = envelope(ctx, "compare");
  summary["rows"] = rows;
  summary["threads"] = ctx.threads;
  write_json(ctx, "summary_compare.json", summary);
  return kOk;
}

int cmd_skew(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  if (cfg.model != "rbergomi" && cfg.model != "bergomi2f")
    throw SchemaError({"model: skew supports rbergomi and bergomi2f"});
  if (cfg.skew.maturities.size() < 3)
    throw SchemaError({"skew.maturities: at least 3 maturities are needed to fit a power law"});

  SmileFunction fn;
  if (cfg.model == "rbergomi") {
    fn = [&](double T, const std::vector<double>& k) {
      const TimeGrid grid = make_time_grid(T, cfg.skew.steps);
      HybridPlan plan(grid, cfg.params.alpha(), cfg.near_field);
      const auto logs = terminal_log_prices_rbergomi(plan, cfg.params, cfg.paths, cfg.seed, ctx.threads);
      return mc_smile(logs, k, T);
    };
  } else {
    fn = [&](double T, const std::vector<double>& k) { return bergomi2f_smile(cfg, T, k); };
  }
  const SkewReport r = atm_skew(fn, cfg.skew.maturities, cfg.skew.bump);

  json j = envelope(ctx, "skew");
  j["model"] = cfg.model;
  j["maturities"] = r.maturities;
  j["psi"] = r.psi;
  j["psi_stderr"] = r.psi_stderr;
  j["psi_half_bump"] = r.psi_half;
  j["psi_richardson"] = r.psi_richardson;
  j["flagged"] = r.flagged;
  j["bump"] = r.bump;
  j["fit_valid"] = r.fit_valid;
  j["fit_message"] = r.fit_message;
  j["exponent"] = r.exponent;
  j["intercept"] = r.intercept;
  j["fit_residual"] = r.residual;
  if (cfg.model == "bergomi2f") {
    std::vector<double> psi_t2, shape;
    for (std::size_t i = 0; i < r.maturities.size(); ++i) {
      const double T = r.maturities[i];
      psi_t2.push_back(r.psi[i] * T * T);
      shape.push_back(std::abs(two_factor_skew_shape(cfg.bergomi2f, T)));
    }
    j["psi_times_T2"] = psi_t2;
    j["analytic_shape"] = shape;
  }
  write_json(ctx, "skew_" + cfg.model + ".json", j);
  if (!r.fit_valid) {
    ctx.log << "error: " << r.fit_message << "\n";
    return kNumeric;
  }
  ctx.log << "skew exponent " << r.exponent << "\n";
  return kOk;
}

}  // namespace

int run_command(std::string_view name, const CommandOptions& options, std::ostream& log, std::ostream& err) {
  try {
    json doc = options.config_path.empty() ? json{{"schema_version", kSchemaVersion}}
                                           : read_json_file(options.config_path);
    RunConfig cfg = parse_config(doc);
    if (options.seed) cfg.seed = *options.seed;
    if (options.threads) {
      if (*options.threads < 0) throw SchemaError({"--threads: must be non-negative"});
      cfg.threads = *options.threads;
    }

    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec || !fs::is_directory(options.out_dir)) throw IoError("cannot create output directory: " + options.out_dir);

    Context ctx{cfg, doc, run_hash(cfg), fs::path(options.out_dir), resolve_threads(cfg.threads), log};
    if (name == "simulate") return cmd_simulate(ctx);
    if (name == "fit-kernel") return cmd_fit_kernel(ctx);
    if (name == "smile") return cmd_smile(ctx);
    if (name == "compare") return cmd_compare(ctx);
    if (name == "skew") return cmd_skew(ctx);
    err << "unknown command: " << name << "\n";
    return kSchema;
  } catch (const SchemaError& e) {
    err << e.what() << "\n";
    return kSchema;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace roughvol::cli
