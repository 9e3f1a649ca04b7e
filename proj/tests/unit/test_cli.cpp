#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "roughvol/cli/commands.hpp"
#include "roughvol/cli/config.hpp"

using namespace roughvol::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("roughvol_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const std::string& cmd, const fs::path& cfg, const fs::path& out, std::string* err_text = nullptr) {
  CommandOptions o;
  o.config_path = cfg.string();
  o.out_dir = out.string();
  std::ostringstream log, err;
  const int rc = run_command(cmd, o, log, err);
  if (err_text) *err_text = err.str();
  return rc;
}

json small_config() {
  return {{"schema_version", 1},
          {"model", "rbergomi"},
          {"grid", {{"T", 1.0}, {"steps", 50}}},
          {"paths", 2000},
          {"seed", 11},
          {"repetitions", 1}};
}

}  // namespace

TEST_CASE("schema errors list every offending key") {
  json j = small_config();
  j["paths"] = 0;
  j["bogus"] = true;
  j["params"] = {{"H", 0.7}, {"colour", "red"}};
  j["kernel"] = {{"n", 0}};
  try {
    parse_config(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string w = e.what();
    CHECK(w.find("paths") != std::string::npos);
    CHECK(w.find("bogus") != std::string::npos);
    CHECK(w.find("params.H") != std::string::npos);
    CHECK(w.find("params.colour") != std::string::npos);
    CHECK(w.find("kernel.n") != std::string::npos);
    CHECK(e.problems().size() == 5);
  }
  CHECK_THROWS_AS(parse_config(json{{"model", "rbergomi"}}), SchemaError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 2}}), SchemaError);
  json t = small_config();
  t["model"] = "abergomi";
  t["grid"]["steps"] = 75;
  CHECK_THROWS_AS(parse_config(t), SchemaError);
  t["abergomi"] = {{"mult_factor", 0.9}};
  CHECK_NOTHROW(parse_config(t));
}

TEST_CASE("config round trip and hash") {
  const auto c = parse_config(small_config());
  const json full = to_json(c);
  const auto again = parse_config(full);
  CHECK(to_json(again) == full);
  CHECK(config_hash(full).size() == 16);
  CHECK(config_hash(full) == config_hash(to_json(again)));
  json other = full;
  other["seed"] = 12;
  CHECK(config_hash(other) != config_hash(full));
}

TEST_CASE("simulate writes byte-identical CSV on rerun and rejects paths = 0") {
  const auto dir = scratch_dir("simulate");
  const auto cfg = write_config(dir, small_config());
  REQUIRE(run("simulate", cfg, dir / "a") == kOk);
  REQUIRE(run("simulate", cfg, dir / "b") == kOk);
  const auto a = slurp(dir / "a" / "terminal_rbergomi.csv");
  CHECK(a == slurp(dir / "b" / "terminal_rbergomi.csv"));
  CHECK(a.rfind("# config_hash=", 0) == 0);
  CHECK(a.find("path,log_price\n") != std::string::npos);
  CHECK(a.find('\r') == std::string::npos);
  const json summary = json::parse(slurp(dir / "a" / "summary_simulate_rbergomi.json"));
  CHECK(summary["runtime_seconds"].get<double>() > 0.0);

  // re-running from the embedded configuration reproduces the file
  const auto cfg2 = dir / "embedded.json";
  std::ofstream(cfg2) << summary["config"].dump();
  REQUIRE(run("simulate", cfg2, dir / "c") == kOk);
  CHECK(slurp(dir / "c" / "terminal_rbergomi.csv") == a);

  json bad = small_config();
  bad["paths"] = 0;
  std::string err;
  CHECK(run("simulate", write_config(dir, bad), dir / "d", &err) == kSchema);
  CHECK(err.find("paths") != std::string::npos);
}

TEST_CASE("fit-kernel: closed-form certificate, least squares and n = 0") {
  const auto dir = scratch_dir("fit");
  json j = small_config();
  j["grid"]["steps"] = 100;
  j["kernel"] = {{"n", 25}, {"method", "closed-form"}};
  REQUIRE(run("fit-kernel", write_config(dir, j), dir) == kOk);
  const json cf = json::parse(slurp(dir / "kernel_closed-form_n25.json"));
  CHECK(cf["bound_satisfied"].get<bool>());
  CHECK(cf["l2_error"].get<double>() <= cf["bound"].get<double>());
  CHECK(cf["weights"].size() == 25);

  j["kernel"] = {{"n", 25}, {"method", "least-squares"}};
  REQUIRE(run("fit-kernel", write_config(dir, j), dir) == kOk);
  const json ls = json::parse(slurp(dir / "kernel_least-squares_n25.json"));
  CHECK(ls["rmse"].get<double>() <= 2e-5);

  j["kernel"] = {{"n", 25}, {"method", "least-squares"}, {"max_iterations", 2}};
  CHECK(run("fit-kernel", write_config(dir, j), dir) == kNumeric);
  const json fail = json::parse(slurp(dir / "kernel_least-squares_n25.json"));
  CHECK_FALSE(fail["converged"].get<bool>());

  j["kernel"] = {{"n", 0}};
  CHECK(run("fit-kernel", write_config(dir, j), dir) == kSchema);
}

TEST_CASE("smile: defaults echoed and a flat Black-Scholes column") {
  const auto dir = scratch_dir("smile");
  json j = small_config();
  j["paths"] = 20000;
  j["bs"] = {{"vol", 0.2}};
  j["smile"] = {{"models", {"bs"}}, {"steps", {50}}};
  REQUIRE(run("smile", write_config(dir, j), dir) == kOk);
  const json s = json::parse(slurp(dir / "summary_smile.json"));
  CHECK(s["strikes"]["defaulted"].get<bool>());
  CHECK(s["strikes"]["count"].get<int>() == 21);
  std::istringstream csv(slurp(dir / "smile_bs_T1_N50.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  std::getline(csv, line);
  CHECK(line == "log_moneyness,strike,implied_vol,price,stderr");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (int c = 0; c < 3; ++c) std::getline(ls, cell, ',');
    CHECK(std::abs(std::stod(cell) - 0.2) < 0.01);
    ++rows;
  }
  CHECK(rows == 21);
}

TEST_CASE("compare: table factor row and self-consistency") {
  const auto dir = scratch_dir("compare");
  json j = small_config();
  j["compare"] = {{"terms", {5}}, {"steps", {100}}};
  j["kernel"] = {{"n", 5}};
  REQUIRE(run("compare", write_config(dir, j), dir) == kOk);
  const json s = json::parse(slurp(dir / "summary_compare.json"));
  REQUIRE(s["rows"].size() == 1);
  CHECK(s["rows"][0]["mult_factor_squared"].get<double>() == doctest::Approx(0.550447453));
  CHECK(s["rows"][0]["rmse"].get<double>() > 0.0);
}

TEST_CASE("skew: two maturities rejected, two-factor analytic report") {
  const auto dir = scratch_dir("skew");
  json j = small_config();
  j["model"] = "bergomi2f";
  j["skew"] = {{"maturities", {0.5, 1.0}}};
  CHECK(run("skew", write_config(dir, j), dir) == kSchema);
  j["skew"] = {{"maturities", {0.1, 0.25, 0.5, 1.0, 2.0}}};
  REQUIRE(run("skew", write_config(dir, j), dir) == kOk);
  const json r = json::parse(slurp(dir / "skew_bergomi2f.json"));
  const auto pt2 = r["psi_times_T2"].get<std::vector<double>>();
  for (std::size_t i = 1; i < pt2.size(); ++i) CHECK(pt2[i] > pt2[i - 1]);
}

TEST_CASE("I/O failure maps to exit code 4") {
  const auto dir = scratch_dir("io");
  const auto cfg = write_config(dir, small_config());
  std::ofstream(dir / "blocker") << "x";
  CHECK(run("simulate", cfg, dir / "blocker" / "sub") == kIo);
  CHECK(run("simulate", dir / "missing.json", dir) == kIo);
}

TEST_CASE("executable exit codes") {
  const auto dir = scratch_dir("exe");
  json bad = small_config();
  bad["paths"] = 0;
  const auto cfg = write_config(dir, bad);
  const std::string cmd = std::string(ROUGHVOL_CLI_PATH) + " --config " + cfg.string() + " --out " +
                          dir.string() + " simulate 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == kSchema);
  const auto good = write_config(dir, small_config());
  const std::string ok = std::string(ROUGHVOL_CLI_PATH) + " --config " + good.string() + " --out " + dir.string() +
                         " --seed 5 --threads 2 simulate >/dev/null";
  const int s2 = std::system(ok.c_str());
  REQUIRE(WIFEXITED(s2));
  CHECK(WEXITSTATUS(s2) == kOk);
}
