#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sigprop/theory.hpp"

namespace sigprop {

enum class RegimeLabel { Trainable, RankCollapse, EntropyCollapse };

/// Lowercase names used in serialized output: trainable, rank_collapse, entropy_collapse.
std::string to_string(RegimeLabel label);
RegimeLabel regime_from_string(const std::string& s);

struct ClassifierConfig {
  int layers = 60;
  /// rho at the final layer at or above this value counts as rank collapse.
  double collapse_threshold = 0.99;
  /// Input cosine similarity; about 1/sqrt(d) for random embeddings.
  double rho0 = 0.04;

  void validate() const;
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;

  /// n evenly spaced values from lo to hi inclusive (just lo when n == 1).
  [[nodiscard]] std::vector<double> values() const;
  void validate(const std::string& name) const;
  friend bool operator==(const GridRange&, const GridRange&) = default;
};

struct DiagramGrid {
  std::vector<double> alpha_axis;
  std::vector<double> beta_axis;
  /// labels[i][j] for alpha_axis[i], beta_axis[j].
  std::vector<std::vector<RegimeLabel>> labels;
  BlockParams block_template;
  ClassifierConfig classifier;
};

struct NonMonotoneBoundary : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoTrainableRegion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FixedPoint {
  double rho_star = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace regime {

/// Entropy collapse when beta exceeds the first-layer threshold beta_c(rho0);
/// otherwise rank collapse iff rho after cfg.layers blocks reaches the threshold.
RegimeLabel classify(const BlockParams& params, const ClassifierConfig& cfg);

DiagramGrid trainability_diagram(const BlockParams& block_template, const GridRange& alpha_range,
                                 const GridRange& beta_range, const ClassifierConfig& cfg, int threads = 0);

/// Smallest alpha_sa for which the network stays trainable, to within tol.
double critical_alpha(const BlockParams& block_template, const ClassifierConfig& cfg, double tol = 1e-6);

FixedPoint find_fixed_point(const BlockParams& params, double rho_init, int max_iter = 10000, double tol = 1e-10);

}  // namespace regime
}  // namespace sigprop
