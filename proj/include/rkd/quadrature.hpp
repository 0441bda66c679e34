#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>

namespace rkd::quadrature {

//! Nodes and weights of the N-point Gauss-Legendre rule on [-1, 1].
template<int N>
struct GaussLegendre
{
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre()
  {
    for (int i = 0; i < (N + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= N; ++k) {
          double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = N * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16)
          break;
      }
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

namespace detail {

template<class F>
Eigen::MatrixXd
gl_panel(const F& f, double a, double b)
{
  static const GaussLegendre<24> rule;
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  Eigen::MatrixXd acc = rule.weights[0] * f(mid + half * rule.nodes[0]);
  for (int i = 1; i < 24; ++i)
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * acc;
}

template<class F>
Eigen::MatrixXd
adapt(const F& f, double a, double b, const Eigen::MatrixXd& whole, double tol,
      int depth)
{
  const double m = 0.5 * (a + b);
  Eigen::MatrixXd left = gl_panel(f, a, m);
  Eigen::MatrixXd right = gl_panel(f, m, b);
  Eigen::MatrixXd both = left + right;
  if (depth >= 30 || (both - whole).cwiseAbs().maxCoeff() <= tol)
    return both;
  return adapt(f, a, m, left, 0.5 * tol, depth + 1) +
         adapt(f, m, b, right, 0.5 * tol, depth + 1);
}

} // namespace detail

//! Adaptive Gauss-Legendre integration of a matrix-valued integrand.
//! Panels are bisected until the refined estimate moves by at most `tol`
//! (absolute, elementwise).
template<class F>
Eigen::MatrixXd
integrate(const F& f, double a, double b, double tol = 1e-10)
{
  if (b <= a) {
    Eigen::MatrixXd probe = f(a);
    return Eigen::MatrixXd::Zero(probe.rows(), probe.cols());
  }
  Eigen::MatrixXd whole = detail::gl_panel(f, a, b);
  return detail::adapt(f, a, b, whole, tol, 0);
}

} // namespace rkd::quadrature
