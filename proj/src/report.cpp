#include "sigprop/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace sigprop::io {
namespace {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string csv_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else return v;
      },
      c);
}

ojson json_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> ojson {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return format_double(v);
          return v;
        } else return v;
      },
      c);
}

Cell opt(const std::optional<sim::AttentionStats>& a, double sim::AttentionStats::*field) {
  if (!a) return std::monostate{};
  return (*a).*field;
}

}  // namespace

void Table::add_metadata_lines(const std::vector<std::string>& lines) {
  for (const auto& l : lines) {
    const auto eq = l.find(" = ");
    if (eq == std::string::npos) metadata.emplace_back(l, "");
    else metadata.emplace_back(l.substr(0, eq), l.substr(eq + 3));
  }
}

std::string render_csv(const Table& t) {
  std::string out;
  for (const auto& [k, v] : t.metadata) out += "# " + k + " = " + v + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw std::logic_error("render_csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  for (const auto& [k, v] : t.summary) out += "# " + k + " = " + csv_cell(v) + "\n";
  return out;
}

std::string render_json(const Table& t) {
  ojson doc;
  ojson meta = ojson::object();
  for (const auto& [k, v] : t.metadata) meta[k] = v;
  doc["metadata"] = meta;
  doc["columns"] = t.columns;
  ojson rows = ojson::array();
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw std::logic_error("render_json: row width does not match header");
    ojson r = ojson::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = json_cell(row[i]);
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  ojson summary = ojson::object();
  for (const auto& [k, v] : t.summary) summary[k] = json_cell(v);
  doc["summary"] = summary;
  return doc.dump(2) + "\n";
}

std::string render(const Table& t, OutputFormat f) { return f == OutputFormat::Json ? render_json(t) : render_csv(t); }

void write_text(const std::string& content, const std::filesystem::path& path) {
  if (path.empty()) {
    std::cout << content;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

Comparison compare_report(const Trajectory& theory, const sim::EmpiricalTrajectory& empirical) {
  if (theory.states.size() != empirical.layers.size())
    throw std::invalid_argument("compare_report: theory has " + std::to_string(theory.states.size()) +
                                " layers, empirical has " + std::to_string(empirical.layers.size()));
  Comparison c;
  double total = 0.0;
  for (std::size_t l = 0; l < theory.states.size(); ++l) {
    ComparisonRow r;
    r.layer = static_cast<int>(l);
    r.theory = theory.states[l].rho();
    r.mean = empirical.layers[l].rho_mean;
    r.std = empirical.layers[l].rho_std;
    r.deviation = std::abs(r.theory - r.mean);
    c.max_deviation = std::max(c.max_deviation, r.deviation);
    total += r.deviation;
    c.rows.push_back(r);
  }
  if (!c.rows.empty()) c.mean_deviation = total / static_cast<double>(c.rows.size());
  return c;
}

Table trajectory_table(const Trajectory& theory, const sim::EmpiricalTrajectory* empirical) {
  Table t;
  t.columns = {"layer", "rho_theory"};
  if (!empirical) {
    for (std::size_t l = 0; l < theory.states.size(); ++l)
      t.rows.push_back({static_cast<long long>(l), theory.states[l].rho()});
    return t;
  }
  const Comparison cmp = compare_report(theory, *empirical);
  t.columns.insert(t.columns.end(), {"rho_mean", "rho_std", "ipr", "entropy"});
  for (std::size_t l = 0; l < theory.states.size(); ++l) {
    const auto& e = empirical->layers[l];
    t.rows.push_back({static_cast<long long>(l), cmp.rows[l].theory, e.rho_mean, e.rho_std,
                      opt(e.attention, &sim::AttentionStats::ipr), opt(e.attention, &sim::AttentionStats::entropy)});
  }
  t.summary = {{"max_deviation", cmp.max_deviation}, {"mean_deviation", cmp.mean_deviation}};
  return t;
}

Table diagram_table(const DiagramGrid& grid) {
  Table t;
  t.add_metadata_lines(block_lines(grid.block_template));
  t.metadata.emplace_back("layers", std::to_string(grid.classifier.layers));
  t.metadata.emplace_back("collapse_threshold", format_exact(grid.classifier.collapse_threshold));
  t.metadata.emplace_back("rho0", format_exact(grid.classifier.rho0));
  t.columns = {"alpha_sa", "beta", "regime"};
  for (std::size_t i = 0; i < grid.alpha_axis.size(); ++i)
    for (std::size_t j = 0; j < grid.beta_axis.size(); ++j)
      t.rows.push_back({grid.alpha_axis[i], grid.beta_axis[j], to_string(grid.labels[i][j])});
  return t;
}

void write_trajectory_csv(const Trajectory& theory, const std::filesystem::path& path) {
  write_text(render_csv(trajectory_table(theory)), path);
}

void write_trajectory_csv(const Trajectory& theory, const sim::EmpiricalTrajectory& empirical,
                          const std::filesystem::path& path) {
  write_text(render_csv(trajectory_table(theory, &empirical)), path);
}

void write_diagram_csv(const DiagramGrid& grid, const std::filesystem::path& path) {
  write_text(render_csv(diagram_table(grid)), path);
}

}  // namespace sigprop::io
