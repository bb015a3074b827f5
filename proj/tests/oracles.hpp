#pragma once

// Reference computations that share no code with the library. They are slow
// and deliberately plain.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

// Gauss-Legendre nodes on [-1, 1] via the Golub-Welsch eigenproblem.
inline std::pair<std::vector<double>, std::vector<double>> golub_welsch(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    w[i] = 2.0 * v * v;
  }
  return {x, w};
}

// 2 E[relu(z1) relu(z2)] for unit normals with correlation rho, integrated in
// polar coordinates. The radial integral is exact (int r^3 e^{-r^2/2} = 2);
// the angular integrand is smooth on the arc where both factors are positive.
inline double relu_kernel(double rho) {
  const double phi = std::acos(std::clamp(rho, -1.0, 1.0));
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double a = phi - std::numbers::pi / 2;
  const double b = std::numbers::pi / 2;
  if (!(b > a)) return 0.0;
  static const auto rule = golub_welsch(64);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.first.size(); ++i) {
    const double th = 0.5 * (b - a) * rule.first[i] + 0.5 * (a + b);
    acc += rule.second[i] * std::cos(th) * (rho * std::cos(th) + s * std::sin(th));
  }
  acc *= 0.5 * (b - a);
  return 2.0 * acc / std::numbers::pi;
}

// Dense trapezoid rule on [-10, 10]^2 with the bivariate normal density
// written out directly; rho = 1 falls back to the 1-D marginal.
inline double tanh_pair_expectation(double scale, double rho, int n = 1000) {
  const double L = 10.0;
  const double h = 2.0 * L / (n - 1);
  std::vector<double> z(n), t(n), w(n);
  for (int i = 0; i < n; ++i) {
    z[i] = -L + h * i;
    t[i] = std::tanh(scale * z[i]);
    w[i] = (i == 0 || i == n - 1) ? 0.5 : 1.0;
  }
  if (rho >= 1.0) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += w[i] * t[i] * t[i] * std::exp(-0.5 * z[i] * z[i]);
    return acc * h / std::sqrt(2.0 * std::numbers::pi);
  }
  const double det = 1.0 - rho * rho;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      const double e = (z[i] * z[i] - 2.0 * rho * z[i] * z[j] + z[j] * z[j]) / (2.0 * det);
      row += w[j] * t[j] * std::exp(-e);
    }
    acc += w[i] * t[i] * row;
  }
  return acc * h * h * norm;
}

// Tanh two-layer MLP map on (q, p): returns (q2, p2).
inline std::pair<double, double> tanh_mlp(double q, double p, double sw2, double sb2) {
  const double q1 = sw2 * q + sb2;
  const double p1 = sw2 * p + sb2;
  const double rho1 = p1 / q1;
  const double s = std::sqrt(q1);
  return {sw2 * tanh_pair_expectation(s, 1.0) + sb2, sw2 * tanh_pair_expectation(s, rho1) + sb2};
}

}  // namespace oracle
