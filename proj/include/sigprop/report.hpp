#pragma once

// Tabular output shared by every command. A Table is rendered either as CSV
// (`#`-prefixed metadata, header row, data rows, `#` summary lines) or as a
// JSON object with the same content.

#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sigprop/config.hpp"
#include "sigprop/regime.hpp"
#include "sigprop/sim.hpp"
#include "sigprop/theory.hpp"

namespace sigprop::io {

/// Empty cells render as an empty CSV field and as JSON null.
using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;

  void add_metadata_lines(const std::vector<std::string>& key_value_lines);
};

/// Doubles use 10 significant digits, lines end in '\n'.
std::string render_csv(const Table& table);
std::string render_json(const Table& table);
std::string render(const Table& table, OutputFormat format);

/// Writes to path, or to stdout when path is empty. Throws IoError naming the path.
void write_text(const std::string& content, const std::filesystem::path& path);

struct ComparisonRow {
  int layer = 0;
  double theory = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double deviation = 0.0;  // |theory - mean|
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
};

/// Throws std::invalid_argument if the trajectories differ in length.
Comparison compare_report(const Trajectory& theory, const sim::EmpiricalTrajectory& empirical);

/// Columns layer,rho_theory and, with an empirical trajectory,
/// rho_mean,rho_std,ipr,entropy plus max/mean deviation summary lines.
Table trajectory_table(const Trajectory& theory, const sim::EmpiricalTrajectory* empirical = nullptr);

/// Long format alpha_sa,beta,regime in alpha-major order, with the block
/// template and classifier settings as metadata.
Table diagram_table(const DiagramGrid& grid);

void write_trajectory_csv(const Trajectory& theory, const std::filesystem::path& path);
void write_trajectory_csv(const Trajectory& theory, const sim::EmpiricalTrajectory& empirical,
                          const std::filesystem::path& path);
void write_diagram_csv(const DiagramGrid& grid, const std::filesystem::path& path);

}  // namespace sigprop::io
