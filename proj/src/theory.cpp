#include "sigprop/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sigprop/quadrature.hpp"

namespace sigprop {

double GeometryState::rho() const {
  if (q == 0.0) return 1.0;
  return std::clamp(p / q, -1.0, 1.0);
}

void GeometryState::validate() const {
  if (!std::isfinite(q) || !std::isfinite(p)) throw std::domain_error("GeometryState: non-finite component");
  if (!(q > 0.0)) throw std::domain_error("GeometryState: q must be positive");
  if (std::abs(p) > q * (1.0 + kUnitTolerance)) throw std::domain_error("GeometryState: |p| exceeds q");
}

GeometryState GeometryState::normalized(double rho) {
  if (!(rho >= -1.0 - kUnitTolerance && rho <= 1.0 + kUnitTolerance))
    throw std::domain_error("GeometryState: cosine similarity outside [-1, 1]");
  return {1.0, std::clamp(rho, -1.0, 1.0)};
}

std::vector<double> Trajectory::rhos() const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.rho());
  return out;
}

void AttentionParams::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and nonnegative");
  if (seq_len < 2) throw std::invalid_argument("seq_len must be >= 2");
  if (!(value_var > 0.0) || !std::isfinite(value_var)) throw std::invalid_argument("sigma_v2 must be positive");
}

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "tanh" || s == "Tanh") return Activation::Tanh;
  throw std::invalid_argument("activation must be relu or tanh, got '" + s + "'");
}

void MlpParams::validate() const {
  if (!(sigma_w2 > 0.0) || !std::isfinite(sigma_w2)) throw std::invalid_argument("sigma_w2 must be positive");
  if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2)) throw std::invalid_argument("sigma_b2 must be nonnegative");
  if (quad_nodes < 8 || quad_nodes % 8 != 0) throw std::invalid_argument("quad_nodes must be a multiple of 8, >= 8");
}

void BlockParams::validate() const {
  attn.validate();
  mlp.validate();
  if (!(alpha_sa >= 0.0) || !std::isfinite(alpha_sa)) throw std::invalid_argument("alpha_sa must be nonnegative");
  if (!(alpha_mlp >= 0.0) || !std::isfinite(alpha_mlp)) throw std::invalid_argument("alpha_mlp must be nonnegative");
}

namespace theory {
namespace {

void require_rho_below_one(double rho, const char* what) {
  if (!(rho >= -1.0 - kUnitTolerance)) throw std::domain_error(std::string(what) + ": rho below -1");
  if (!(rho < 1.0)) throw std::domain_error(std::string(what) + ": rho must be < 1");
}

bool is_unit(double rho) { return rho >= 1.0 - kUnitTolerance; }

double tanh_fn(double x) { return std::tanh(x); }

}  // namespace

double sigma_a_from_beta(double beta, int seq_len) {
  if (seq_len < 2) throw std::domain_error("sigma_a_from_beta: T must be >= 2");
  if (!(beta >= 0.0)) throw std::domain_error("sigma_a_from_beta: beta must be nonnegative");
  return beta * std::sqrt(std::log(static_cast<double>(seq_len)));
}

double effective_beta(int head_dim, int seq_len, double init_std, double log_base) {
  if (head_dim < 1) throw std::domain_error("effective_beta: head_dim must be >= 1");
  if (seq_len < 2) throw std::domain_error("effective_beta: T must be >= 2");
  if (!(init_std > 0.0)) throw std::domain_error("effective_beta: init_std must be positive");
  if (log_base > 0.0 && log_base == 1.0) throw std::domain_error("effective_beta: log base 1 is undefined");
  double log_t = std::log(static_cast<double>(seq_len));
  if (log_base > 0.0) log_t /= std::log(log_base);
  return init_std * init_std * head_dim / std::sqrt(log_t);
}

double beta_critical(double rho) {
  require_rho_below_one(rho, "beta_critical");
  return std::sqrt(2.0 / (1.0 - std::max(rho, -1.0)));
}

double y_q(double beta, double rho) {
  const double bc = beta_critical(rho);
  if (beta <= bc) return 0.0;
  return 1.0 - bc / beta;
}

double y_q_finite_size(double beta, double rho, int seq_len) {
  if (seq_len < 2) throw std::domain_error("y_q_finite_size: T must be >= 2");
  const double bc = beta_critical(rho);
  if (beta >= bc) return y_q(beta, rho);
  const double exponent = -1.0 + (beta * beta) / (bc * bc);
  return std::clamp(std::pow(static_cast<double>(seq_len), exponent), 0.0, 1.0);
}

double y_p(double beta, double rho, int seq_len, bool finite_size) {
  const double bc = beta_critical(rho);
  if (!finite_size) return 0.0;
  if (seq_len < 2) throw std::domain_error("y_p: T must be >= 2");
  return beta < bc ? 1.0 / seq_len : 0.0;
}

GeometryState sa_update(const GeometryState& state, const AttentionParams& attn) {
  state.validate();
  if (std::abs(state.q - 1.0) > kUnitTolerance)
    throw std::invalid_argument("sa_update: input must be layer-normalised (q = 1)");
  const double s = attn.value_var;
  const double rho = state.rho();
  if (is_unit(rho)) return {s, s};

  const double yq = attn.finite_size ? y_q_finite_size(attn.beta, rho, attn.seq_len) : y_q(attn.beta, rho);
  const double yp = y_p(attn.beta, rho, attn.seq_len, attn.finite_size);
  return {s * (rho + (1.0 - rho) * yq), s * (rho + (1.0 - rho) * yp)};
}

GeometryState residual_merge(const GeometryState& branch, const GeometryState& input, double alpha) {
  const double a2 = alpha * alpha;
  return {branch.q + a2 * input.q, branch.p + a2 * input.p};
}

GeometryState layer_norm_geometry(const GeometryState& state) {
  if (!(state.q > 0.0)) throw std::domain_error("layer_norm_geometry: q must be positive");
  return {1.0, state.rho()};
}

double relu_kernel_f(double rho) {
  if (std::abs(rho) > 1.0 + 1e-12) throw std::domain_error("relu_kernel_f: |rho| > 1");
  const double r = std::clamp(rho, -1.0, 1.0);
  return (std::sqrt(1.0 - r * r) + r * (std::numbers::pi - std::acos(r))) / std::numbers::pi;
}

GeometryState mlp_update(const GeometryState& state, const MlpParams& mlp) {
  state.validate();
  const double w2 = mlp.sigma_w2;
  const double b2 = mlp.sigma_b2;
  const double q1 = w2 * state.q + b2;
  const double p1 = w2 * state.p + b2;
  const double rho1 = std::clamp(p1 / q1, -1.0, 1.0);

  double q2 = 0.0, p2 = 0.0;
  if (mlp.activation == Activation::ReLU) {
    q2 = 0.5 * w2 * q1 + b2;
    p2 = 0.5 * w2 * q1 * relu_kernel_f(rho1) + b2;
  } else {
    const auto rule = quadrature::composite_normal_rule(mlp.quad_nodes);
    const double scale = std::sqrt(q1);
    const double diag = quadrature::expect_correlated(rule, scale, 1.0, tanh_fn);
    const double off = is_unit(rho1) ? diag : quadrature::expect_correlated(rule, scale, rho1, tanh_fn);
    q2 = w2 * diag + b2;
    p2 = w2 * off + b2;
  }
  if (!std::isfinite(q2) || !std::isfinite(p2)) throw NumericalError("mlp_update: non-finite quadrature result");
  return {q2, p2};
}

GeometryState block_update(const GeometryState& state, const BlockParams& params) {
  const GeometryState sa_in = layer_norm_geometry(state);
  const GeometryState sa_out = sa_update(sa_in, params.attn);
  const GeometryState merged = residual_merge(sa_out, sa_in, params.alpha_sa);
  // A fully collapsed branch with no residual leaves every token at the same
  // (zero) vector: the rank-collapsed state.
  const GeometryState mlp_in = merged.q > 0.0 ? layer_norm_geometry(merged) : GeometryState{1.0, 1.0};
  const GeometryState mlp_out = mlp_update(mlp_in, params.mlp);
  return layer_norm_geometry(residual_merge(mlp_out, mlp_in, params.alpha_mlp));
}

Trajectory iterate_depth(double rho0, const BlockParams& params, int layers) {
  if (layers < 1) throw std::invalid_argument("iterate_depth: layers must be >= 1");
  params.validate();
  Trajectory traj;
  traj.states.reserve(layers + 1);
  traj.states.push_back(GeometryState::normalized(rho0));
  for (int l = 0; l < layers; ++l) {
    const GeometryState next = block_update(traj.states.back(), params);
    if (!std::isfinite(next.p)) throw NumericalError("iterate_depth: non-finite state");
    traj.states.push_back(next);
  }
  return traj;
}

}  // namespace theory
}  // namespace sigprop
