#pragma once

// Monte Carlo simulation of random post-norm transformer blocks. Tokens are
// rows of a T x d matrix; every random draw comes from a caller-supplied
// RngStream so that runs are reproducible task by task.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sigprop/rng.hpp"
#include "sigprop/theory.hpp"

namespace sigprop::sim {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

struct SequenceBatch {
  Matrix embeddings;  // T x d

  [[nodiscard]] int seq_len() const { return static_cast<int>(embeddings.rows()); }
  [[nodiscard]] int dim() const { return static_cast<int>(embeddings.cols()); }
  void validate() const;
};

struct AttentionStats {
  double ipr = 0.0;            // mean over rows of sum_s A_ts^2
  double cross_overlap = 0.0;  // mean over row pairs t != t' of sum_s A_ts A_t's
  double entropy = 0.0;        // mean row Shannon entropy, nats
};

/// Pairwise geometry of a batch. rho_mean/rho_std are over token pairs
/// (all pairs up to T = 2048, otherwise 2^18 sampled pairs).
struct GeometryMeasurement {
  double q = 0.0;
  double p = 0.0;
  double rho_mean = 0.0;
  double rho_std = 0.0;
  std::size_t pairs = 0;

  [[nodiscard]] GeometryState state() const { return {q, p}; }
};

struct AttentionWeights {
  Matrix query, key, value;  // d x d
};

struct MlpWeights {
  Matrix w1, w2;  // d x d
  RowVector b1, b2;
};

struct BlockWeights {
  AttentionWeights attn;
  MlpWeights mlp;
};

struct SimConfig {
  int d = 512;
  BlockParams block;
  int n_seeds = 10;
  int n_sequences = 10;
  std::uint64_t base_seed = 0;
  /// Target cosine similarity of generated input sequences.
  double rho0 = 0.04;

  [[nodiscard]] int seq_len() const { return block.attn.seq_len; }
  void validate() const;
};

struct LayerRecord {
  double rho_mean = 0.0;  // mean over (seed, sequence) runs of the pair-averaged cosine
  double rho_std = 0.0;   // sample standard deviation over the same runs
  double q_mean = 0.0;
  std::optional<AttentionStats> attention;  // absent for the input layer
};

struct EmpiricalTrajectory {
  std::vector<LayerRecord> layers;  // layers[0] is the input

  [[nodiscard]] std::vector<double> rho_means() const;
};

/// X_t = sqrt(rho) g0 + sqrt(1 - rho) g_t, g's i.i.d. standard normal in R^d.
SequenceBatch generate_sequence(double rho_target, int seq_len, int d, RngStream& rng);

/// Scales every row to norm sqrt(d); no mean subtraction, no affine part.
SequenceBatch layer_norm_apply(const SequenceBatch& batch);

/// Query/key entries ~ N(0, sigma_a / d) with sigma_a = beta sqrt(ln T),
/// value entries ~ N(0, value_var / d). Draw order: Q, K, V, row-major.
AttentionWeights sample_attention_weights(int d, const AttentionParams& attn, RngStream& rng);
MlpWeights sample_mlp_weights(int d, const MlpParams& mlp, RngStream& rng);
BlockWeights sample_block_weights(int d, const BlockParams& params, RngStream& rng);

/// Row-softmax diagnostics of an attention matrix.
AttentionStats attention_stats(const Matrix& attention);

/// Softmax attention with row-max subtraction. Returns the outputs and the
/// attention matrix itself.
std::pair<SequenceBatch, Matrix> attention_apply(const SequenceBatch& batch, const AttentionWeights& weights);

std::pair<SequenceBatch, AttentionStats> attention_forward(const SequenceBatch& batch, const AttentionWeights& weights);

/// Samples fresh weights with T = batch length and unit value variance.
std::pair<SequenceBatch, AttentionStats> attention_forward(const SequenceBatch& batch, double beta, RngStream& rng);

SequenceBatch mlp_forward(const SequenceBatch& batch, const MlpWeights& weights, Activation activation);
SequenceBatch mlp_forward(const SequenceBatch& batch, const MlpParams& mlp, int d, RngStream& rng);

/// LN -> SA -> +alpha_sa * (LN input) -> LN -> MLP -> +alpha_mlp * (MLP input) -> LN.
std::pair<SequenceBatch, AttentionStats> block_forward(const SequenceBatch& batch, const BlockParams& params,
                                                       const BlockWeights& weights);
std::pair<SequenceBatch, AttentionStats> block_forward(const SequenceBatch& batch, const BlockParams& params,
                                                       RngStream& rng);

GeometryMeasurement measure_geometry(const SequenceBatch& batch);

/// Seed streams (documented in README):
///   input sequence k of seed s:  derive_seed(base, {s, k, 0})
///   weights of block l of seed s: derive_seed(base, {s, 2^64 - 1, l + 1})
/// Weights are shared by all sequences of a seed and redrawn for every block.
EmpiricalTrajectory run_depth_experiment(const SimConfig& cfg, int layers, int threads = 0);

struct SaPhaseCell {
  double beta = 0.0;
  double rho = 0.0;
  double sa_rho_mean = 0.0;  // mean over seeds of pair-averaged output cosine
  double sa_rho_std = 0.0;
  double sa_q = 0.0;
  double sa_p = 0.0;
  AttentionStats stats;
};

/// One attention layer per (beta, rho) cell. Seed s uses the streams
/// derive_seed(base, {s, 0}) for the sequence and derive_seed(base, {s, 1})
/// for the weights in every cell (common random numbers across the grid).
/// Cells are ordered beta-major.
std::vector<SaPhaseCell> run_sa_phase_experiment(int d, int seq_len, const std::vector<double>& beta_grid,
                                                 const std::vector<double>& rho_grid, int n_seeds,
                                                 std::uint64_t base_seed, int threads = 0);

struct IprResult {
  double beta = 0.0;
  double rho = 0.0;
  int seq_len = 0;
  int n_seeds = 0;
  double ipr_mean = 0.0;
  double ipr_std = 0.0;
  double entropy_mean = 0.0;
};

/// Long-sequence IPR: one query row (token 0) per seed, keys streamed token
/// by token so memory stays O(T + d^2). Seed s uses derive_seed(base, {s}).
IprResult run_ipr_experiment(int d, int seq_len, double beta, double rho, int n_seeds, std::uint64_t base_seed,
                             int threads = 0);

}  // namespace sigprop::sim
