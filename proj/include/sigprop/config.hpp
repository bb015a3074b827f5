#pragma once

// Run configuration files: one `key = value` pair per line, `#` starts a
// comment, blank lines are ignored. Grammar and key list are in README.md.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sigprop/regime.hpp"
#include "sigprop/sim.hpp"
#include "sigprop/theory.hpp"

namespace sigprop::io {

struct ParseError : std::invalid_argument {
  ParseError(int line, const std::string& what)
      : std::invalid_argument("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

struct ValidationError : std::invalid_argument {
  ValidationError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

struct RunConfig {
  BlockParams block = default_block();
  ClassifierConfig classifier;
  int d = 512;
  int n_seeds = 10;
  int n_sequences = 10;
  std::uint64_t base_seed = 0;
  GridRange alpha_range{0.5, 3.0, 26};
  GridRange beta_range{0.005, 2.5, 100};
  /// <= 0 selects the natural logarithm.
  double log_base = 0.0;
  std::string output;  // empty: stdout
  OutputFormat format = OutputFormat::Csv;

  static BlockParams default_block();
  [[nodiscard]] sim::SimConfig sim_config() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Every key, in canonical serialization order.
const std::vector<std::string>& config_keys();

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Assigns one key; throws ValidationError for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Throws ValidationError naming the first offending key.
void validate_config(const RunConfig& cfg);

/// `key = value` lines in canonical order; parse_config inverts it exactly.
std::vector<std::string> config_lines(const RunConfig& cfg);
std::string serialize_config(const RunConfig& cfg);

/// `key = value` lines describing a block (subset of config_lines).
std::vector<std::string> block_lines(const BlockParams& block);

/// Shortest decimal form that reads back to the same double.
std::string format_exact(double v);

}  // namespace sigprop::io
