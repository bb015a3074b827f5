#include "sigprop/sim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sigprop/parallel.hpp"

namespace sigprop::sim {
namespace {

constexpr int kAllPairsMaxLen = 2048;
constexpr std::size_t kSampledPairs = std::size_t{1} << 18;
constexpr std::uint64_t kWeightStream = std::numeric_limits<std::uint64_t>::max();

void fill_normal(Matrix& m, double stddev, RngStream& rng) {
  double* data = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; ++i) data[i] = stddev * rng.normal();
}

void fill_normal(RowVector& v, double stddev, RngStream& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = stddev * rng.normal();
}

Matrix normal_matrix(int rows, int cols, double stddev, RngStream& rng) {
  Matrix m(rows, cols);
  fill_normal(m, stddev, rng);
  return m;
}

void normalize_rows(Matrix& x) {
  const double target = std::sqrt(static_cast<double>(x.cols()));
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double norm = x.row(t).norm();
    if (!(norm > 0.0)) throw std::domain_error("layer_norm_apply: zero row");
    x.row(t) *= target / norm;
  }
}

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

void softmax_rows(Matrix& scores) {
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    auto row = scores.row(t);
    const double mx = row.maxCoeff();
    double sum = 0.0;
    for (Eigen::Index s = 0; s < row.size(); ++s) {
      row[s] = std::exp(row[s] - mx);
      sum += row[s];
    }
    row /= sum;
  }
}

}  // namespace

void SequenceBatch::validate() const {
  if (embeddings.rows() < 1 || embeddings.cols() < 1) throw std::invalid_argument("SequenceBatch: empty");
  if (!embeddings.allFinite()) throw std::domain_error("SequenceBatch: non-finite entries");
}

void SimConfig::validate() const {
  if (d < 2) throw std::invalid_argument("d must be >= 2");
  block.validate();
  if (n_seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  if (n_sequences < 1) throw std::invalid_argument("sequences must be >= 1");
  if (!(rho0 >= 0.0 && rho0 < 1.0)) throw std::invalid_argument("rho0 must lie in [0, 1) for generated sequences");
}

std::vector<double> EmpiricalTrajectory::rho_means() const {
  std::vector<double> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.rho_mean);
  return out;
}

SequenceBatch generate_sequence(double rho_target, int seq_len, int d, RngStream& rng) {
  if (!(rho_target >= 0.0 && rho_target < 1.0)) throw std::invalid_argument("generate_sequence: rho must lie in [0, 1)");
  if (seq_len < 1 || d < 1) throw std::invalid_argument("generate_sequence: empty shape");
  const double shared = std::sqrt(rho_target);
  const double own = std::sqrt(1.0 - rho_target);
  RowVector g0(d);
  fill_normal(g0, 1.0, rng);
  SequenceBatch batch{normal_matrix(seq_len, d, own, rng)};
  batch.embeddings.rowwise() += shared * g0;
  return batch;
}

SequenceBatch layer_norm_apply(const SequenceBatch& batch) {
  SequenceBatch out = batch;
  normalize_rows(out.embeddings);
  return out;
}

AttentionWeights sample_attention_weights(int d, const AttentionParams& attn, RngStream& rng) {
  const double sigma_a = theory::sigma_a_from_beta(attn.beta, attn.seq_len);
  const double qk_std = std::sqrt(sigma_a / d);
  const double v_std = std::sqrt(attn.value_var / d);
  AttentionWeights w;
  w.query = normal_matrix(d, d, qk_std, rng);
  w.key = normal_matrix(d, d, qk_std, rng);
  w.value = normal_matrix(d, d, v_std, rng);
  return w;
}

MlpWeights sample_mlp_weights(int d, const MlpParams& mlp, RngStream& rng) {
  const double w_std = std::sqrt(mlp.sigma_w2 / d);
  const double b_std = std::sqrt(mlp.sigma_b2);
  MlpWeights w;
  w.w1 = normal_matrix(d, d, w_std, rng);
  w.b1 = RowVector(d);
  fill_normal(w.b1, b_std, rng);
  w.w2 = normal_matrix(d, d, w_std, rng);
  w.b2 = RowVector(d);
  fill_normal(w.b2, b_std, rng);
  return w;
}

BlockWeights sample_block_weights(int d, const BlockParams& params, RngStream& rng) {
  BlockWeights w;
  w.attn = sample_attention_weights(d, params.attn, rng);
  w.mlp = sample_mlp_weights(d, params.mlp, rng);
  return w;
}

AttentionStats attention_stats(const Matrix& a) {
  const Eigen::Index rows = a.rows();
  AttentionStats st;
  double ipr_sum = 0.0;
  double entropy_sum = 0.0;
  for (Eigen::Index t = 0; t < rows; ++t) {
    double row_h = 0.0;
    for (Eigen::Index s = 0; s < a.cols(); ++s) {
      const double w = a(t, s);
      if (w > 0.0) row_h -= w * std::log(w);
    }
    ipr_sum += a.row(t).squaredNorm();
    entropy_sum += row_h;
  }
  st.ipr = ipr_sum / rows;
  st.entropy = entropy_sum / rows;
  if (rows > 1) {
    const RowVector colsum = a.colwise().sum();
    st.cross_overlap = (colsum.squaredNorm() - ipr_sum) / (static_cast<double>(rows) * (rows - 1));
  } else {
    st.cross_overlap = 0.0;
  }
  return st;
}

std::pair<SequenceBatch, Matrix> attention_apply(const SequenceBatch& batch, const AttentionWeights& w) {
  const Matrix& x = batch.embeddings;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  const Matrix qx = x * w.query.transpose();
  const Matrix kx = x * w.key.transpose();
  Matrix a = (qx * kx.transpose()) * inv_sqrt_d;
  softmax_rows(a);
  const Matrix vx = x * w.value.transpose();
  SequenceBatch out{a * vx};
  return {std::move(out), std::move(a)};
}

std::pair<SequenceBatch, AttentionStats> attention_forward(const SequenceBatch& batch, const AttentionWeights& w) {
  auto [out, a] = attention_apply(batch, w);
  return {std::move(out), attention_stats(a)};
}

std::pair<SequenceBatch, AttentionStats> attention_forward(const SequenceBatch& batch, double beta, RngStream& rng) {
  batch.validate();
  AttentionParams attn;
  attn.beta = beta;
  attn.seq_len = batch.seq_len();
  attn.value_var = 1.0;
  return attention_forward(batch, sample_attention_weights(batch.dim(), attn, rng));
}

SequenceBatch mlp_forward(const SequenceBatch& batch, const MlpWeights& w, Activation activation) {
  Matrix h = batch.embeddings * w.w1.transpose();
  h.rowwise() += w.b1;
  if (activation == Activation::ReLU)
    h = h.cwiseMax(0.0);
  else
    h = h.array().tanh().matrix();
  SequenceBatch out{h * w.w2.transpose()};
  out.embeddings.rowwise() += w.b2;
  return out;
}

SequenceBatch mlp_forward(const SequenceBatch& batch, const MlpParams& mlp, int d, RngStream& rng) {
  batch.validate();
  if (batch.dim() != d) throw std::invalid_argument("mlp_forward: batch dimension does not match d");
  return mlp_forward(batch, sample_mlp_weights(d, mlp, rng), mlp.activation);
}

std::pair<SequenceBatch, AttentionStats> block_forward(const SequenceBatch& batch, const BlockParams& params,
                                                       const BlockWeights& w) {
  const SequenceBatch x0 = layer_norm_apply(batch);
  auto [sa, a] = attention_apply(x0, w.attn);
  sa.embeddings += params.alpha_sa * x0.embeddings;
  const SequenceBatch x1 = layer_norm_apply(sa);
  SequenceBatch m = mlp_forward(x1, w.mlp, params.mlp.activation);
  m.embeddings += params.alpha_mlp * x1.embeddings;
  return {layer_norm_apply(m), attention_stats(a)};
}

std::pair<SequenceBatch, AttentionStats> block_forward(const SequenceBatch& batch, const BlockParams& params,
                                                       RngStream& rng) {
  batch.validate();
  params.validate();
  return block_forward(batch, params, sample_block_weights(batch.dim(), params, rng));
}

GeometryMeasurement measure_geometry(const SequenceBatch& batch) {
  const Matrix& x = batch.embeddings;
  const Eigen::Index t_len = x.rows();
  if (t_len < 2) throw std::invalid_argument("measure_geometry: need at least two tokens");
  const double d = static_cast<double>(x.cols());

  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  GeometryMeasurement m;
  m.q = sq.mean() / d;

  double dot_sum = 0.0, cos_sum = 0.0, cos_sq_sum = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](double dot, Eigen::Index i, Eigen::Index j) {
    const double c = dot / std::sqrt(sq[i] * sq[j]);
    dot_sum += dot;
    cos_sum += c;
    cos_sq_sum += c * c;
    ++count;
  };

  if (t_len <= kAllPairsMaxLen) {
    const Matrix gram = x * x.transpose();
    for (Eigen::Index i = 0; i < t_len; ++i)
      for (Eigen::Index j = i + 1; j < t_len; ++j) accumulate(gram(i, j), i, j);
  } else {
    RngStream rng(derive_seed(0x9a125eedULL, {static_cast<std::uint64_t>(t_len)}));
    for (std::size_t k = 0; k < kSampledPairs; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.uniform() * t_len);
      auto j = static_cast<Eigen::Index>(rng.uniform() * (t_len - 1));
      if (j >= i) ++j;
      accumulate(x.row(i).dot(x.row(j)), i, j);
    }
  }
  const double n = static_cast<double>(count);
  m.pairs = count;
  m.p = dot_sum / n / d;
  m.rho_mean = cos_sum / n;
  m.rho_std = count > 1 ? std::sqrt(std::max(0.0, (cos_sq_sum - n * m.rho_mean * m.rho_mean) / (n - 1))) : 0.0;
  return m;
}

EmpiricalTrajectory run_depth_experiment(const SimConfig& cfg, int layers, int threads) {
  cfg.validate();
  if (layers < 0) throw std::invalid_argument("run_depth_experiment: layers must be >= 0");
  const int seeds = cfg.n_seeds;
  const int seqs = cfg.n_sequences;
  const std::size_t depth = static_cast<std::size_t>(layers) + 1;

  // Per (seed, sequence, layer) results, filled by independent seed tasks.
  std::vector<GeometryMeasurement> geo(static_cast<std::size_t>(seeds) * seqs * depth);
  std::vector<AttentionStats> att(geo.size());
  auto slot = [&](int s, int k, std::size_t l) { return (static_cast<std::size_t>(s) * seqs + k) * depth + l; };

  parallel_for(static_cast<std::size_t>(seeds), threads, [&](std::size_t si) {
    const int s = static_cast<int>(si);
    std::vector<SequenceBatch> batch;
    batch.reserve(seqs);
    for (int k = 0; k < seqs; ++k) {
      RngStream rng(derive_seed(cfg.base_seed, {si, static_cast<std::uint64_t>(k), 0}));
      batch.push_back(generate_sequence(cfg.rho0, cfg.seq_len(), cfg.d, rng));
      geo[slot(s, k, 0)] = measure_geometry(batch.back());
    }
    for (std::size_t l = 0; l < static_cast<std::size_t>(layers); ++l) {
      RngStream rng(derive_seed(cfg.base_seed, {si, kWeightStream, l + 1}));
      const BlockWeights w = sample_block_weights(cfg.d, cfg.block, rng);
      for (int k = 0; k < seqs; ++k) {
        auto [out, stats] = block_forward(batch[k], cfg.block, w);
        batch[k] = std::move(out);
        geo[slot(s, k, l + 1)] = measure_geometry(batch[k]);
        att[slot(s, k, l + 1)] = stats;
      }
    }
  });

  EmpiricalTrajectory traj;
  traj.layers.resize(depth);
  const double runs = static_cast<double>(seeds) * seqs;
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<double> rhos;
    rhos.reserve(static_cast<std::size_t>(seeds) * seqs);
    double q_sum = 0.0;
    AttentionStats st;
    for (int s = 0; s < seeds; ++s) {
      for (int k = 0; k < seqs; ++k) {
        const auto& g = geo[slot(s, k, l)];
        rhos.push_back(g.rho_mean);
        q_sum += g.q;
        const auto& a = att[slot(s, k, l)];
        st.ipr += a.ipr;
        st.cross_overlap += a.cross_overlap;
        st.entropy += a.entropy;
      }
    }
    auto [mean, stddev] = mean_std(rhos);
    LayerRecord& rec = traj.layers[l];
    rec.rho_mean = mean;
    rec.rho_std = stddev;
    rec.q_mean = q_sum / runs;
    if (l > 0) rec.attention = AttentionStats{st.ipr / runs, st.cross_overlap / runs, st.entropy / runs};
  }
  return traj;
}

std::vector<SaPhaseCell> run_sa_phase_experiment(int d, int seq_len, const std::vector<double>& beta_grid,
                                                 const std::vector<double>& rho_grid, int n_seeds,
                                                 std::uint64_t base_seed, int threads) {
  if (beta_grid.empty() || rho_grid.empty()) throw std::invalid_argument("run_sa_phase_experiment: empty grid");
  if (n_seeds < 1) throw std::invalid_argument("run_sa_phase_experiment: seeds must be >= 1");
  if (d < 2 || seq_len < 2) throw std::invalid_argument("run_sa_phase_experiment: need d >= 2 and T >= 2");

  const std::size_t cells = beta_grid.size() * rho_grid.size();
  std::vector<GeometryMeasurement> geo(cells * n_seeds);
  std::vector<AttentionStats> att(geo.size());

  parallel_for(geo.size(), threads, [&](std::size_t task) {
    const std::size_t cell = task / n_seeds;
    const auto seed = static_cast<std::uint64_t>(task % n_seeds);
    AttentionParams attn;
    attn.beta = beta_grid[cell / rho_grid.size()];
    attn.seq_len = seq_len;
    const double rho = rho_grid[cell % rho_grid.size()];

    RngStream seq_rng(derive_seed(base_seed, {seed, 0}));
    RngStream w_rng(derive_seed(base_seed, {seed, 1}));
    const SequenceBatch x = layer_norm_apply(generate_sequence(rho, seq_len, d, seq_rng));
    auto [out, stats] = attention_forward(x, sample_attention_weights(d, attn, w_rng));
    geo[task] = measure_geometry(out);
    att[task] = stats;
  });

  std::vector<SaPhaseCell> result(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    SaPhaseCell& cell = result[c];
    cell.beta = beta_grid[c / rho_grid.size()];
    cell.rho = rho_grid[c % rho_grid.size()];
    std::vector<double> rhos;
    for (int s = 0; s < n_seeds; ++s) {
      const auto& g = geo[c * n_seeds + s];
      const auto& a = att[c * n_seeds + s];
      rhos.push_back(g.rho_mean);
      cell.sa_q += g.q / n_seeds;
      cell.sa_p += g.p / n_seeds;
      cell.stats.ipr += a.ipr / n_seeds;
      cell.stats.cross_overlap += a.cross_overlap / n_seeds;
      cell.stats.entropy += a.entropy / n_seeds;
    }
    std::tie(cell.sa_rho_mean, cell.sa_rho_std) = mean_std(rhos);
  }
  return result;
}

IprResult run_ipr_experiment(int d, int seq_len, double beta, double rho, int n_seeds, std::uint64_t base_seed,
                             int threads) {
  if (d < 2 || seq_len < 2) throw std::invalid_argument("run_ipr_experiment: need d >= 2 and T >= 2");
  if (n_seeds < 1) throw std::invalid_argument("run_ipr_experiment: seeds must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("run_ipr_experiment: rho must lie in [0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("run_ipr_experiment: beta must be nonnegative");

  std::vector<double> ipr(n_seeds), entropy(n_seeds);
  parallel_for(static_cast<std::size_t>(n_seeds), threads, [&](std::size_t s) {
    RngStream rng(derive_seed(base_seed, {s}));
    const double sigma_a = theory::sigma_a_from_beta(beta, seq_len);
    const double qk_std = std::sqrt(sigma_a / d);
    const Matrix query = normal_matrix(d, d, qk_std, rng);
    const Matrix key = normal_matrix(d, d, qk_std, rng);

    const double shared = std::sqrt(rho);
    const double own = std::sqrt(1.0 - rho);
    const double target = std::sqrt(static_cast<double>(d));
    RowVector g0(d);
    fill_normal(g0, 1.0, rng);
    RowVector token(d);
    auto next_token = [&] {
      for (int i = 0; i < d; ++i) token[i] = shared * g0[i] + own * rng.normal();
      token *= target / token.norm();
    };

    // a_0t = (Q x_0) . (K x_t) / sqrt(d) = x_t . (K^T Q x_0) / sqrt(d)
    next_token();
    const RowVector u = (key.transpose() * (query * token.transpose())).transpose() / target;
    std::vector<double> scores(seq_len);
    scores[0] = token.dot(u);
    for (int t = 1; t < seq_len; ++t) {
      next_token();
      scores[t] = token.dot(u);
    }
    double mx = scores[0];
    for (double v : scores) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : scores) {
      v = std::exp(v - mx);
      z += v;
    }
    double sum_sq = 0.0, h = 0.0;
    for (double v : scores) {
      const double w = v / z;
      sum_sq += w * w;
      if (w > 0.0) h -= w * std::log(w);
    }
    ipr[s] = sum_sq;
    entropy[s] = h;
  });

  IprResult r;
  r.beta = beta;
  r.rho = rho;
  r.seq_len = seq_len;
  r.n_seeds = n_seeds;
  std::tie(r.ipr_mean, r.ipr_std) = mean_std(ipr);
  r.entropy_mean = mean_std(entropy).first;
  return r;
}

}  // namespace sigprop::sim
