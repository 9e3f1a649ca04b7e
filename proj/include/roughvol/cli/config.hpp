#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "roughvol/analytics.hpp"
#include "roughvol/hybrid_scheme.hpp"
#include "roughvol/models.hpp"
#include "roughvol/sim_core.hpp"

namespace roughvol::cli {

inline constexpr int kSchemaVersion = 1;

/// Invalid configuration; what() lists every offending key, one per line.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KernelMethod { closed_form, least_squares };

struct KernelSpec {
  std::size_t n = 25;
  KernelMethod method = KernelMethod::least_squares;
  std::size_t n_grid = 0;  // 0: use the simulation step count
  int max_iterations = 500;
  double subgrid_weight = 0.0;  // penalty on lags below the first grid point
};

struct AbergomiSpec {
  bool table_factor = true;  // m = sqrt(tabulated m^2) for the step count
  double mult_factor = 1.0;  // used when table_factor is false
  MultPlacement placement = MultPlacement::exponent;
  std::optional<double> theta;  // default T - dt
  bool exact_compensator = false;
  FactorStepping stepping = FactorStepping::exponential;
};

struct StrikeSpec {
  double k_min = -0.2;
  double k_max = 0.2;
  std::size_t count = 21;
};

struct SkewSpec {
  std::vector<double> maturities{0.1, 0.25, 0.5, 1.0, 2.0};
  double bump = 0.01;
  std::size_t steps = 100;
};

struct CompareSpec {
  std::vector<std::size_t> terms{15, 20, 25};
  std::vector<std::size_t> steps{50, 100, 150, 200};
};

struct SmileSpec {
  std::vector<std::string> models{"rbergomi", "abergomi"};
  std::vector<std::size_t> steps{50, 100, 150, 200};
};

struct RunConfig {
  std::string model = "rbergomi";
  ModelParams params;
  double T = 1.0;
  std::size_t steps = 100;
  std::size_t paths = 20000;
  std::uint64_t seed = 42;
  int threads = 0;
  int repetitions = 3;
  NearField near_field = NearField::exact;
  KernelSpec kernel;
  AbergomiSpec abergomi;
  StrikeSpec strikes;
  double bs_vol = 0.2;
  TwoFactorParams bergomi2f;
  SkewSpec skew;
  CompareSpec compare;
  SmileSpec smile;
};

/// Parses and validates a configuration document. Missing keys take defaults.
/// Throws SchemaError listing every invalid or unknown key.
RunConfig parse_config(const nlohmann::json& doc);

/// Fully expanded configuration, suitable for re-running.
nlohmann::json to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Reads and parses a JSON file; IoError when unreadable, SchemaError on bad JSON.
nlohmann::json read_json_file(const std::string& path);

}  // namespace roughvol::cli
