#include "sigprop/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sigprop::quadrature {

GaussianRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  GaussianRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

GaussianRule composite_normal_rule(int total_nodes, double half_width) {
  constexpr int kPanelNodes = 8;
  if (total_nodes < kPanelNodes || total_nodes % kPanelNodes != 0)
    throw std::invalid_argument("composite_normal_rule: total_nodes must be a positive multiple of 8");
  if (!(half_width > 0.0)) throw std::invalid_argument("composite_normal_rule: half_width must be positive");

  static const GaussianRule base = gauss_legendre(kPanelNodes);
  const int panels = total_nodes / kPanelNodes;
  const double h = 2.0 * half_width / panels;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);

  GaussianRule rule;
  rule.nodes.reserve(total_nodes);
  rule.weights.reserve(total_nodes);
  for (int k = 0; k < panels; ++k) {
    const double mid = -half_width + (k + 0.5) * h;
    for (int j = 0; j < kPanelNodes; ++j) {
      const double z = mid + 0.5 * h * base.nodes[j];
      rule.nodes.push_back(z);
      rule.weights.push_back(0.5 * h * base.weights[j] * norm * std::exp(-0.5 * z * z));
    }
  }
  return rule;
}

double expect_1d(const GaussianRule& rule, const std::function<double(double)>& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * g(rule.nodes[i]);
  return acc;
}

double expect_correlated(const GaussianRule& rule, double scale, double rho, double (*phi)(double)) {
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const std::size_t n = rule.nodes.size();
  if (s == 0.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = phi(scale * rule.nodes[i]);
      acc += rule.weights[i] * v * v;
    }
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rule.nodes[i];
    const double outer = phi(scale * z1);
    const double shift = rho * z1;
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += rule.weights[j] * phi(scale * (shift + s * rule.nodes[j]));
    acc += rule.weights[i] * outer * inner;
  }
  return acc;
}

}  // namespace sigprop::quadrature
