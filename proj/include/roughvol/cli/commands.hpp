#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "roughvol/cli/config.hpp"

namespace roughvol::cli {

enum ExitCode : int { kOk = 0, kSchema = 2, kNumeric = 3, kIo = 4 };

struct CommandOptions {
  std::string config_path;  // empty: all defaults
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;  // 0 = auto
};

/// Runs one subcommand (simulate, fit-kernel, smile, compare, skew) and maps
/// failures to exit codes. Progress goes to `log`, diagnostics to `err`.
int run_command(std::string_view name, const CommandOptions& options, std::ostream& log,
                std::ostream& err);

/// Shortest round-trip decimal form.
std::string format_double(double x);

/// Writes via a temporary file in the same directory, then renames. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);

/// Hash of the configuration with run-invariant keys (threads) removed.
std::string run_hash(const RunConfig& cfg);

}  // namespace roughvol::cli
