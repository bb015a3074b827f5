// sigprop: command-line front end.
//
// Exit codes: 0 success, 1 assertion failure, 2 usage or validation error,
// 3 numerical or runtime error.

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "sigprop/config.hpp"
#include "sigprop/parallel.hpp"
#include "sigprop/regime.hpp"
#include "sigprop/report.hpp"
#include "sigprop/sim.hpp"
#include "sigprop/theory.hpp"

namespace {

using namespace sigprop;
using io::Cell;
using io::RunConfig;
using io::Table;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags that map one-to-one onto config keys. Values are kept as strings and
// applied through the config parser so both paths validate identically.
struct Overrides {
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> options;
  std::vector<std::pair<bool*, std::string>> flags;
  std::vector<std::unique_ptr<bool>> flag_storage;

  void value(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(app->add_option(flag, values[key], help), key);
  }
  void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    flag_storage.push_back(std::make_unique<bool>(false));
    app->add_flag(flag, *flag_storage.back(), help);
    flags.emplace_back(flag_storage.back().get(), key);
  }
  void apply(RunConfig& cfg) const {
    for (const auto& [opt, key] : options)
      if (opt->count() > 0) io::set_config_value(cfg, key, values.at(key));
    for (const auto& [set, key] : flags)
      if (*set) io::set_config_value(cfg, key, "true");
  }
};

struct Globals {
  std::string config_path;
  int threads = 0;
};

void add_block_flags(CLI::App* app, Overrides& ov) {
  ov.value(app, "--beta", "beta", "Inverse temperature of the query/key init");
  ov.value(app, "--T", "seq_len", "Sequence length");
  ov.flag(app, "--finite-size", "finite_size", "Use finite-length attention corrections");
  ov.value(app, "--sigma-v2", "sigma_v2", "Value weight variance times d");
  ov.value(app, "--sigma-w2", "sigma_w2", "MLP weight variance times d");
  ov.value(app, "--sigma-b2", "sigma_b2", "MLP bias variance");
  ov.value(app, "--activation", "activation", "relu or tanh");
  ov.value(app, "--quad-nodes", "quad_nodes", "Quadrature nodes for tanh (multiple of 8)");
  ov.value(app, "--alpha-sa", "alpha_sa", "Residual strength around attention");
  ov.value(app, "--alpha-mlp", "alpha_mlp", "Residual strength around the MLP");
}

void add_classifier_flags(CLI::App* app, Overrides& ov) {
  ov.value(app, "--layers", "layers", "Number of blocks");
  ov.value(app, "--rho0", "rho0", "Input cosine similarity");
}

void add_sim_flags(CLI::App* app, Overrides& ov) {
  ov.value(app, "--d", "d", "Embedding dimension");
  ov.value(app, "--seeds", "seeds", "Independent weight draws");
}

RunConfig effective_config(const Globals& g, const Overrides& ov) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : io::load_config(g.config_path);
  ov.apply(cfg);
  io::validate_config(cfg);
  return cfg;
}

// Header echo of the effective configuration. The output path is left out so
// identical runs written to different files stay byte-identical.
void echo_config(Table& t, const RunConfig& cfg) {
  for (const auto& line : io::config_lines(cfg))
    if (line.rfind("output = ", 0) != 0 && line.rfind("format = ", 0) != 0) t.add_metadata_lines({line});
}

void emit(const Table& t, const RunConfig& cfg) { io::write_text(io::render(t, cfg.format), cfg.output); }

// "lo:hi:n" for an evenly spaced range, otherwise a comma-separated list.
std::vector<double> parse_grid(const std::string& flag, const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw UsageError(flag + ": bad number '" + s + "'");
    return v;
  };
  std::vector<std::string> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    parts.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  if (sep == ':') {
    if (parts.size() != 3) throw UsageError(flag + ": expected lo:hi:n");
    const double n = number(parts[2]);
    if (n < 1 || n != std::floor(n)) throw UsageError(flag + ": point count must be a positive integer");
    GridRange r{number(parts[0]), number(parts[1]), static_cast<int>(n)};
    if (r.n > 1 && !(r.hi > r.lo)) throw UsageError(flag + ": range must be increasing");
    return r.values();
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(number(p));
  if (out.empty()) throw UsageError(flag + ": empty grid");
  return out;
}

std::string join_grid(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_exact(v[i]);
  return s;
}

// ---- theory curve ----------------------------------------------------------

struct CurveArgs {
  double beta = 0.0;
  std::optional<double> rho;
  std::string rho_range;
  std::optional<int> seq_len;
  bool finite_size = false;
};

void run_theory_curve(const Globals& g, const Overrides& ov, const CurveArgs& a) {
  RunConfig cfg = effective_config(g, ov);
  if (a.rho.has_value() == !a.rho_range.empty()) throw UsageError("exactly one of --rho or --rho-range is required");
  std::vector<double> rhos = a.rho ? std::vector<double>{*a.rho} : parse_grid("--rho-range", a.rho_range);
  const bool finite = a.seq_len.has_value() || a.finite_size;
  const int T = a.seq_len.value_or(cfg.block.attn.seq_len);

  AttentionParams attn;
  attn.beta = a.beta;
  attn.seq_len = T;
  attn.validate();

  Table t;
  t.metadata.emplace_back("beta", io::format_exact(a.beta));
  t.metadata.emplace_back("rho", join_grid(rhos));
  if (finite) t.metadata.emplace_back("seq_len", std::to_string(T));
  t.columns = {"beta", "rho", "beta_c", "y_q", "y_p", "sa_q", "sa_p", "sa_rho"};
  if (finite) t.columns.insert(t.columns.end(), {"y_q_finite", "y_p_finite", "sa_rho_finite"});
  for (double rho : rhos) {
    const GeometryState in = GeometryState::normalized(rho);
    attn.finite_size = false;
    const GeometryState out = theory::sa_update(in, attn);
    std::vector<Cell> row = {a.beta, rho, theory::beta_critical(rho), theory::y_q(a.beta, rho),
                             theory::y_p(a.beta, rho, T, false), out.q, out.p, out.rho()};
    if (finite) {
      attn.finite_size = true;
      row.insert(row.end(), {theory::y_q_finite_size(a.beta, rho, T), theory::y_p(a.beta, rho, T, true),
                             theory::sa_update(in, attn).rho()});
    }
    t.rows.push_back(std::move(row));
  }
  emit(t, cfg);
}

// ---- theory depth / fixed-point --------------------------------------------

void run_theory_depth(const Globals& g, const Overrides& ov) {
  const RunConfig cfg = effective_config(g, ov);
  Table t = io::trajectory_table(theory::iterate_depth(cfg.classifier.rho0, cfg.block, cfg.classifier.layers));
  echo_config(t, cfg);
  emit(t, cfg);
}

struct FixedPointArgs {
  std::optional<double> rho_init;
  int max_iter = 10000;
  double tol = 1e-10;
};

void run_fixed_point(const Globals& g, const Overrides& ov, const FixedPointArgs& a) {
  const RunConfig cfg = effective_config(g, ov);
  const double start = a.rho_init.value_or(cfg.classifier.rho0);
  const FixedPoint fp = regime::find_fixed_point(cfg.block, start, a.max_iter, a.tol);
  Table t;
  echo_config(t, cfg);
  t.metadata.emplace_back("rho_init", io::format_exact(start));
  t.metadata.emplace_back("max_iter", std::to_string(a.max_iter));
  t.metadata.emplace_back("tol", io::format_exact(a.tol));
  t.columns = {"rho_star", "converged", "iterations"};
  t.rows.push_back({fp.rho_star, std::string(fp.converged ? "true" : "false"), static_cast<long long>(fp.iterations)});
  emit(t, cfg);
}

// ---- diagram ---------------------------------------------------------------

struct DiagramArgs {
  bool critical = false;
  double tol = 1e-6;
};

void run_diagram(const Globals& g, const Overrides& ov, const DiagramArgs& a) {
  const RunConfig cfg = effective_config(g, ov);
  const DiagramGrid grid =
      regime::trainability_diagram(cfg.block, cfg.alpha_range, cfg.beta_range, cfg.classifier, g.threads);
  Table t = io::diagram_table(grid);
  for (const auto& line : io::config_lines(cfg))
    if (line.rfind("alpha_range = ", 0) == 0 || line.rfind("beta_range = ", 0) == 0) t.add_metadata_lines({line});
  if (a.critical) {
    t.metadata.emplace_back("critical_alpha_tol", io::format_exact(a.tol));
    const auto& betas = grid.beta_axis;
    std::vector<Cell> boundary(betas.size());
    parallel_for(betas.size(), g.threads, [&](std::size_t j) {
      BlockParams p = cfg.block;
      p.attn.beta = betas[j];
      if (!(betas[j] < theory::beta_critical(cfg.classifier.rho0))) return;
      try {
        boundary[j] = regime::critical_alpha(p, cfg.classifier, a.tol);
      } catch (const NoTrainableRegion&) {
      } catch (const NonMonotoneBoundary&) {
      }
    });
    t.columns.push_back("critical_alpha");
    for (std::size_t k = 0; k < t.rows.size(); ++k) t.rows[k].push_back(boundary[k % betas.size()]);
  }
  emit(t, cfg);
}

// ---- sim depth -------------------------------------------------------------

void run_sim_depth(const Globals& g, const Overrides& ov, std::optional<double> assert_max_dev) {
  const RunConfig cfg = effective_config(g, ov);
  const int layers = cfg.classifier.layers;
  const sim::EmpiricalTrajectory emp = sim::run_depth_experiment(cfg.sim_config(), layers, g.threads);
  const Trajectory th = theory::iterate_depth(cfg.classifier.rho0, cfg.block, layers);
  Table t = io::trajectory_table(th, &emp);
  echo_config(t, cfg);
  emit(t, cfg);
  if (assert_max_dev) {
    const double dev = io::compare_report(th, emp).max_deviation;
    if (!(dev <= *assert_max_dev)) {
      std::ostringstream msg;
      msg << "max deviation " << dev << " exceeds " << *assert_max_dev;
      throw AssertionFailure(msg.str());
    }
  }
}

// ---- sim sa-phase / ipr ------------------------------------------------------

struct PhaseArgs {
  std::string beta_grid = "0.25:3:12";
  std::string rho_grid = "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
};

void run_sa_phase(const Globals& g, const Overrides& ov, const PhaseArgs& a) {
  RunConfig cfg = effective_config(g, ov);
  const auto betas = parse_grid("--beta-grid", a.beta_grid);
  const auto rhos = parse_grid("--rho-grid", a.rho_grid);
  const int T = cfg.block.attn.seq_len;
  const auto cells = sim::run_sa_phase_experiment(cfg.d, T, betas, rhos, cfg.n_seeds, cfg.base_seed, g.threads);

  Table t;
  t.metadata = {{"d", std::to_string(cfg.d)},
                {"seq_len", std::to_string(T)},
                {"seeds", std::to_string(cfg.n_seeds)},
                {"seed", std::to_string(cfg.base_seed)},
                {"beta_grid", join_grid(betas)},
                {"rho_grid", join_grid(rhos)}};
  t.columns = {"beta",    "rho",           "beta_c",  "sa_rho_mean",   "sa_rho_std",       "ipr",
               "cross_overlap", "entropy", "sa_rho_theory", "sa_rho_finite_theory", "y_q_theory", "y_q_finite_theory"};
  for (const auto& c : cells) {
    AttentionParams attn;
    attn.beta = c.beta;
    attn.seq_len = T;
    const GeometryState in = GeometryState::normalized(c.rho);
    const double asym = theory::sa_update(in, attn).rho();
    attn.finite_size = true;
    const double fin = theory::sa_update(in, attn).rho();
    t.rows.push_back({c.beta, c.rho, theory::beta_critical(c.rho), c.sa_rho_mean, c.sa_rho_std, c.stats.ipr,
                      c.stats.cross_overlap, c.stats.entropy, asym, fin, theory::y_q(c.beta, c.rho),
                      theory::y_q_finite_size(c.beta, c.rho, T)});
  }
  emit(t, cfg);
}

struct IprArgs {
  double beta = 0.0;
  double rho = 0.0;
};

void run_ipr(const Globals& g, const Overrides& ov, const IprArgs& a) {
  RunConfig cfg = effective_config(g, ov);
  const int T = cfg.block.attn.seq_len;
  const sim::IprResult r = sim::run_ipr_experiment(cfg.d, T, a.beta, a.rho, cfg.n_seeds, cfg.base_seed, g.threads);
  Table t;
  t.metadata = {{"d", std::to_string(cfg.d)},
                {"seq_len", std::to_string(T)},
                {"seeds", std::to_string(cfg.n_seeds)},
                {"seed", std::to_string(cfg.base_seed)}};
  t.columns = {"beta", "rho", "seq_len", "seeds", "ipr_mean", "ipr_std", "entropy_mean", "y_q", "y_q_finite"};
  t.rows.push_back({r.beta, r.rho, static_cast<long long>(r.seq_len), static_cast<long long>(r.n_seeds), r.ipr_mean,
                    r.ipr_std, r.entropy_mean, theory::y_q(a.beta, a.rho),
                    theory::y_q_finite_size(a.beta, a.rho, T)});
  emit(t, cfg);
}

// ---- effective-beta --------------------------------------------------------

struct EffBetaArgs {
  int d = 768;
  int heads = 12;
  int seq_len = 512;
  double init_std = 0.02;
  std::string log_base = "e";
};

void run_effective_beta(const Globals& g, const Overrides& ov, const EffBetaArgs& a) {
  RunConfig cfg = effective_config(g, ov);
  if (a.heads < 1) throw UsageError("--heads must be >= 1");
  if (a.d < 1 || a.d % a.heads != 0) throw UsageError("--d must be a positive multiple of --heads");
  if (!(a.init_std > 0.0)) throw UsageError("--init-std must be positive");
  double base = 0.0;
  if (a.log_base != "e") {
    io::set_config_value(cfg, "log_base", a.log_base);
    base = cfg.log_base;
    if (!(base > 0.0) || base == 1.0) throw UsageError("--log-base must be 'e' or a positive number other than 1");
  }
  const int head_dim = a.d / a.heads;
  Table t;
  t.metadata = {{"d", std::to_string(a.d)},
                {"heads", std::to_string(a.heads)},
                {"seq_len", std::to_string(a.seq_len)},
                {"init_std", io::format_exact(a.init_std)},
                {"log_base", a.log_base}};
  t.columns = {"head_dim", "effective_beta"};
  t.rows.push_back({static_cast<long long>(head_dim), theory::effective_beta(head_dim, a.seq_len, a.init_std, base)});
  emit(t, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal propagation in transformer blocks at initialisation"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  Overrides ov;
  app.add_option("--config", g.config_path, "Config file (flags override its values)")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  ov.value(&app, "--format", "format", "csv or json");
  ov.value(&app, "--output", "output", "Output path (default stdout)");
  ov.value(&app, "--seed", "seed", "Base seed");

  std::function<void()> action;

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "Closed-form maps");
  theory_cmd->require_subcommand(1);
  theory_cmd->fallthrough();

  CurveArgs curve;
  auto* curve_cmd = theory_cmd->add_subcommand("curve", "Attention similarity update and IPR over rho");
  curve_cmd->fallthrough();
  curve_cmd->add_option("--beta", curve.beta, "Inverse temperature")->required()->check(CLI::NonNegativeNumber);
  auto* rho_opt = curve_cmd->add_option("--rho", curve.rho, "Input cosine similarity");
  curve_cmd->add_option("--rho-range", curve.rho_range, "lo:hi:n or a comma list")->excludes(rho_opt);
  curve_cmd->add_option("--T", curve.seq_len, "Sequence length; adds finite-size columns");
  curve_cmd->add_flag("--finite-size", curve.finite_size, "Add finite-size columns at the config sequence length");
  curve_cmd->callback([&] { action = [&] { run_theory_curve(g, ov, curve); }; });

  auto* depth_cmd = theory_cmd->add_subcommand("depth", "Iterate the block map through depth");
  depth_cmd->fallthrough();
  add_block_flags(depth_cmd, ov);
  add_classifier_flags(depth_cmd, ov);
  depth_cmd->callback([&] { action = [&] { run_theory_depth(g, ov); }; });

  FixedPointArgs fpa;
  auto* fp_cmd = theory_cmd->add_subcommand("fixed-point", "Fixed point of the block map in rho");
  fp_cmd->fallthrough();
  add_block_flags(fp_cmd, ov);
  ov.value(fp_cmd, "--rho0", "rho0", "Starting cosine similarity (same as --rho-init)");
  auto* rho_init = fp_cmd->add_option("--rho-init", fpa.rho_init, "Starting cosine similarity");
  rho_init->excludes("--rho0");
  fp_cmd->add_option("--max-iter", fpa.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  fp_cmd->add_option("--tol", fpa.tol, "Convergence tolerance on rho")->check(CLI::PositiveNumber);
  fp_cmd->callback([&] { action = [&] { run_fixed_point(g, ov, fpa); }; });

  // diagram
  DiagramArgs dia;
  auto* diagram_cmd = app.add_subcommand("diagram", "Trainability diagram over (alpha_sa, beta)");
  diagram_cmd->fallthrough();
  add_block_flags(diagram_cmd, ov);
  add_classifier_flags(diagram_cmd, ov);
  ov.value(diagram_cmd, "--collapse-threshold", "collapse_threshold", "Final rho counted as rank collapse");
  ov.value(diagram_cmd, "--alpha-range", "alpha_range", "\"lo, hi, n\"");
  ov.value(diagram_cmd, "--beta-range", "beta_range", "\"lo, hi, n\"");
  diagram_cmd->add_flag("--critical-alpha", dia.critical, "Add the bisected regime boundary per beta");
  diagram_cmd->add_option("--tol", dia.tol, "Bisection tolerance")->check(CLI::PositiveNumber);
  diagram_cmd->callback([&] { action = [&] { run_diagram(g, ov, dia); }; });

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Monte Carlo experiments");
  sim_cmd->require_subcommand(1);
  sim_cmd->fallthrough();

  std::optional<double> max_dev;
  auto* sdepth = sim_cmd->add_subcommand("depth", "Theory and simulated rho through depth");
  sdepth->fallthrough();
  add_block_flags(sdepth, ov);
  add_classifier_flags(sdepth, ov);
  add_sim_flags(sdepth, ov);
  ov.value(sdepth, "--sequences", "sequences", "Input sequences per seed");
  sdepth->add_option("--assert-max-dev", max_dev, "Exit 1 if the max deviation exceeds this")
      ->check(CLI::NonNegativeNumber);
  sdepth->callback([&] { action = [&] { run_sim_depth(g, ov, max_dev); }; });

  PhaseArgs phase;
  auto* phase_cmd = sim_cmd->add_subcommand("sa-phase", "Single attention layer over a (beta, rho) grid");
  phase_cmd->fallthrough();
  add_sim_flags(phase_cmd, ov);
  ov.value(phase_cmd, "--T", "seq_len", "Sequence length");
  phase_cmd->add_option("--beta-grid", phase.beta_grid, "lo:hi:n or a comma list")->capture_default_str();
  phase_cmd->add_option("--rho-grid", phase.rho_grid, "lo:hi:n or a comma list")->capture_default_str();
  phase_cmd->callback([&] { action = [&] { run_sa_phase(g, ov, phase); }; });

  IprArgs ipr;
  auto* ipr_cmd = sim_cmd->add_subcommand("ipr", "Attention IPR of one query row over a long sequence");
  ipr_cmd->fallthrough();
  add_sim_flags(ipr_cmd, ov);
  ov.value(ipr_cmd, "--T", "seq_len", "Sequence length");
  ipr_cmd->add_option("--beta", ipr.beta, "Inverse temperature")->required()->check(CLI::NonNegativeNumber);
  ipr_cmd->add_option("--rho", ipr.rho, "Input cosine similarity")->capture_default_str();
  ipr_cmd->callback([&] { action = [&] { run_ipr(g, ov, ipr); }; });

  // effective-beta
  EffBetaArgs eb;
  auto* eb_cmd = app.add_subcommand("effective-beta", "Inverse temperature implied by an init std");
  eb_cmd->fallthrough();
  eb_cmd->add_option("--d", eb.d, "Model dimension")->capture_default_str();
  eb_cmd->add_option("--heads", eb.heads, "Attention heads")->capture_default_str();
  eb_cmd->add_option("--T", eb.seq_len, "Sequence length")->capture_default_str()->check(CLI::Range(2, 1 << 30));
  eb_cmd->add_option("--init-std", eb.init_std, "Weight init standard deviation")->capture_default_str();
  eb_cmd->add_option("--log-base", eb.log_base, "e or a number")->capture_default_str();
  eb_cmd->callback([&] { action = [&] { run_effective_beta(g, ov, eb); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (action) action();
    return 0;
  } catch (const AssertionFailure& e) {
    std::cerr << "assertion failed: " << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
