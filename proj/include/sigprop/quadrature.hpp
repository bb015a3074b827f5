#pragma once

#include <functional>
#include <vector>

namespace sigprop::quadrature {

/// Nodes and weights for expectations over a standard normal variable.
struct GaussianRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1 up to truncation
};

/// n-point Gauss-Legendre rule on [-1, 1].
GaussianRule gauss_legendre(int n);

/// Composite 8-point Gauss-Legendre rule on [-half_width, half_width] with
/// the standard normal density folded into the weights. total_nodes must be a
/// positive multiple of 8. Converges on integrands that are steep near the
/// origin (tanh with large pre-activation variance), where Gauss-Hermite does not.
GaussianRule composite_normal_rule(int total_nodes, double half_width = 10.0);

/// E[g(z)] for z ~ N(0, 1).
double expect_1d(const GaussianRule& rule, const std::function<double(double)>& g);

/// E[phi(a z1) phi(a z2)] for standard normals with correlation rho, using
/// z2 = rho z1 + sqrt(1 - rho^2) z2'.
double expect_correlated(const GaussianRule& rule, double scale, double rho,
                         double (*phi)(double));

}  // namespace sigprop::quadrature
