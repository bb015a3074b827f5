#pragma once

// Closed-form signal-propagation maps for a post-norm transformer block at
// initialisation. Every quantity is tracked through the concentrated pair
// (q, p): mean squared token norm and mean cross inner product, both divided
// by the embedding dimension.

#include <stdexcept>
#include <string>
#include <vector>

namespace sigprop {

/// Tolerance used for every comparison against 1 (cosine similarity, unit norm).
inline constexpr double kUnitTolerance = 1e-9;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryState {
  double q = 1.0;
  double p = 0.0;

  /// Cosine similarity p/q clamped to [-1, 1]. A state with q == 0 (the zero
  /// output of a fully collapsed branch) reports 1.
  [[nodiscard]] double rho() const;

  /// Throws std::domain_error unless q > 0, |p| <= q (up to rounding) and both are finite.
  void validate() const;

  /// Post-layer-norm state (q = 1) with the given cosine similarity.
  static GeometryState normalized(double rho);

  friend bool operator==(const GeometryState&, const GeometryState&) = default;
};

struct AttentionParams {
  double beta = 0.0;
  int seq_len = 512;
  bool finite_size = false;
  /// Value projection entries have variance value_var / d. The theory of a
  /// single attention layer takes value_var = 1; it rescales the branch (q, p).
  double value_var = 1.0;

  void validate() const;
  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

enum class Activation { ReLU, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpParams {
  double sigma_w2 = 2.0;
  double sigma_b2 = 0.0;
  Activation activation = Activation::ReLU;
  /// Total quadrature nodes per dimension for Tanh expectations (multiple of 8).
  int quad_nodes = 512;

  void validate() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

enum class NormPlacement { PostNormBoth };

struct BlockParams {
  AttentionParams attn;
  MlpParams mlp;
  double alpha_sa = 1.0;
  double alpha_mlp = 1.0;
  NormPlacement norm_placement = NormPlacement::PostNormBoth;

  void validate() const;
  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

/// states[0] is the input, states[l] the output of block l.
struct Trajectory {
  std::vector<GeometryState> states;

  [[nodiscard]] std::size_t layers() const { return states.empty() ? 0 : states.size() - 1; }
  [[nodiscard]] std::vector<double> rhos() const;
};

namespace theory {

/// Score scale sigma_a = beta * sqrt(ln T).
double sigma_a_from_beta(double beta, int seq_len);

/// Inverse temperature implied by i.i.d. init with standard deviation
/// init_std: init_std^2 * head_dim / sqrt(log_b T). log_base <= 0 selects the
/// natural logarithm.
double effective_beta(int head_dim, int seq_len, double init_std = 0.02, double log_base = 0.0);

/// Condensation threshold sqrt(2 / (1 - rho)).
double beta_critical(double rho);

/// Asymptotic inverse participation ratio of an attention row.
double y_q(double beta, double rho);

/// Finite-length IPR: T^(-1 + beta^2/beta_c^2) below the threshold, asymptotic above.
double y_q_finite_size(double beta, double rho, int seq_len);

/// Cross-overlap of two distinct attention rows; 1/T for uniform-like rows
/// when finite_size is set, otherwise 0.
double y_p(double beta, double rho, int seq_len, bool finite_size);

/// Self-attention update of a post-layer-norm state (q must be 1).
GeometryState sa_update(const GeometryState& state, const AttentionParams& attn);

/// Adds alpha * input to a branch independent of it.
GeometryState residual_merge(const GeometryState& branch, const GeometryState& input, double alpha);

GeometryState layer_norm_geometry(const GeometryState& state);

/// Arccosine kernel of degree one, normalised so f(1) = 1.
double relu_kernel_f(double rho);

/// Two-layer MLP map applied to its input state (q^(0), p^(0)).
GeometryState mlp_update(const GeometryState& state, const MlpParams& mlp);

/// LN -> SA -> +alpha_sa -> LN -> MLP -> +alpha_mlp -> LN.
GeometryState block_update(const GeometryState& state, const BlockParams& params);

Trajectory iterate_depth(double rho0, const BlockParams& params, int layers);

}  // namespace theory
}  // namespace sigprop
