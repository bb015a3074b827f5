#include "sigprop/regime.hpp"

#include <cmath>

#include "sigprop/parallel.hpp"

namespace sigprop {

std::string to_string(RegimeLabel label) {
  switch (label) {
    case RegimeLabel::Trainable: return "trainable";
    case RegimeLabel::RankCollapse: return "rank_collapse";
    case RegimeLabel::EntropyCollapse: return "entropy_collapse";
  }
  return "unknown";
}

RegimeLabel regime_from_string(const std::string& s) {
  if (s == "trainable") return RegimeLabel::Trainable;
  if (s == "rank_collapse") return RegimeLabel::RankCollapse;
  if (s == "entropy_collapse") return RegimeLabel::EntropyCollapse;
  throw std::invalid_argument("unknown regime '" + s + "'");
}

void ClassifierConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (!(collapse_threshold > 0.0 && collapse_threshold < 1.0))
    throw std::invalid_argument("collapse_threshold must lie in (0, 1)");
  if (!(rho0 >= -1.0 && rho0 < 1.0)) throw std::invalid_argument("rho0 must lie in [-1, 1)");
}

std::vector<double> GridRange::values() const {
  std::vector<double> out;
  out.reserve(n);
  if (n == 1) {
    out.push_back(lo);
    return out;
  }
  for (int i = 0; i < n; ++i) out.push_back(i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1));
  return out;
}

void GridRange::validate(const std::string& name) const {
  if (n < 1) throw std::invalid_argument(name + ": point count must be >= 1");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument(name + ": bounds must be finite");
  if (n > 1 && !(hi > lo)) throw std::invalid_argument(name + ": hi must exceed lo");
}

namespace regime {

RegimeLabel classify(const BlockParams& params, const ClassifierConfig& cfg) {
  cfg.validate();
  params.validate();
  if (params.attn.beta > theory::beta_critical(cfg.rho0)) return RegimeLabel::EntropyCollapse;
  const Trajectory traj = theory::iterate_depth(cfg.rho0, params, cfg.layers);
  return traj.states.back().rho() >= cfg.collapse_threshold ? RegimeLabel::RankCollapse : RegimeLabel::Trainable;
}

DiagramGrid trainability_diagram(const BlockParams& block_template, const GridRange& alpha_range,
                                 const GridRange& beta_range, const ClassifierConfig& cfg, int threads) {
  alpha_range.validate("alpha_range");
  beta_range.validate("beta_range");
  cfg.validate();
  block_template.validate();

  DiagramGrid grid;
  grid.alpha_axis = alpha_range.values();
  grid.beta_axis = beta_range.values();
  grid.block_template = block_template;
  grid.classifier = cfg;

  const std::size_t n = grid.alpha_axis.size();
  const std::size_t m = grid.beta_axis.size();
  std::vector<RegimeLabel> cells(n * m);
  parallel_for(n * m, threads, [&](std::size_t k) {
    BlockParams p = block_template;
    p.alpha_sa = grid.alpha_axis[k / m];
    p.attn.beta = grid.beta_axis[k % m];
    cells[k] = classify(p, cfg);
  });

  grid.labels.assign(n, std::vector<RegimeLabel>(m));
  for (std::size_t k = 0; k < n * m; ++k) grid.labels[k / m][k % m] = cells[k];
  return grid;
}

double critical_alpha(const BlockParams& block_template, const ClassifierConfig& cfg, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("critical_alpha: tol must be positive");
  cfg.validate();
  if (!(block_template.attn.beta < theory::beta_critical(cfg.rho0)))
    throw std::invalid_argument("critical_alpha: beta must lie below the entropy-collapse threshold");

  auto trainable = [&](double alpha) {
    BlockParams p = block_template;
    p.alpha_sa = alpha;
    return classify(p, cfg) == RegimeLabel::Trainable;
  };

  if (trainable(0.0)) return 0.0;

  constexpr double kAlphaCeiling = 64.0;
  double hi = 1.0;
  while (!trainable(hi)) {
    hi *= 2.0;
    if (hi > kAlphaCeiling) throw NoTrainableRegion("critical_alpha: no trainable alpha_sa up to 64");
  }

  constexpr int kProbes = 8;
  double lo_probe = 0.0;
  double hi_probe = hi;
  int flips = 0;
  bool prev = false;  // alpha = 0 is known to collapse
  for (int k = 1; k < kProbes; ++k) {
    const double a = hi * k / (kProbes - 1);
    const bool t = k == kProbes - 1 ? true : trainable(a);
    if (t != prev) {
      ++flips;
      if (t && flips == 1) hi_probe = a;
    }
    if (!t && flips == 0) lo_probe = a;
    prev = t;
  }
  if (flips != 1) throw NonMonotoneBoundary("critical_alpha: probe scan shows more than one regime flip");

  double lo = lo_probe;
  hi = hi_probe;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (trainable(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

FixedPoint find_fixed_point(const BlockParams& params, double rho_init, int max_iter, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("find_fixed_point: tol must be positive");
  params.validate();
  FixedPoint fp;
  double rho = GeometryState::normalized(rho_init).rho();
  for (int it = 0; it < max_iter; ++it) {
    const double next = theory::block_update(GeometryState::normalized(rho), params).rho();
    fp.iterations = it + 1;
    if (std::abs(next - rho) < tol) {
      fp.rho_star = rho;
      fp.converged = true;
      return fp;
    }
    rho = next;
  }
  fp.rho_star = rho;
  return fp;
}

}  // namespace regime
}  // namespace sigprop
