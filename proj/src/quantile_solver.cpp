#include "rkd/quantile_solver.hpp"

#include "rkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rkd {

namespace {

double
max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv)
{
  double step = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0)
      step = std::min(step, -v[i] / dv[i]);
  }
  return step;
}

struct Ipm
{
  Eigen::VectorXd beta;
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Dual LP of the check-loss problem:
//   max_a y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1,
// written as min c'a with c = -y. Regression coefficients are the negated
// multipliers of the equality constraint.
Ipm
interior_point(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
               const QuantileSolverOptions& opts)
{
  constexpr double step_frac = 0.99995;
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();

  const Eigen::VectorXd c = -y;
  const Eigen::VectorXd b = (1.0 - tau) * X.colwise().sum().transpose();

  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, tau);
  Eigen::VectorXd d = X.householderQr().solve(c);
  Eigen::VectorXd r = c - X * d;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r[i] == 0.0)
      r[i] = 1e-3;
  }
  Eigen::VectorXd z = r.cwiseMax(0.0);
  Eigen::VectorXd w = z - r;

  Ipm out;
  const double scale = 1.0 + y.cwiseAbs().sum();
  out.gap = c.dot(a) - b.dot(d) + w.sum();
  Eigen::MatrixXd normal(k, k);
  Eigen::VectorXd q(n), dx(n), ds(n), dz(n), dw(n), dy(k);
  double best_gap = out.gap;
  int stalled = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    if (out.gap <= opts.gap_tol * scale)
      break;
    out.iterations = it + 1;

    q = (z.cwiseQuotient(a) + w.cwiseQuotient(s)).cwiseInverse();
    r = z - w;
    normal.noalias() = X.transpose() * (X.array().colwise() * q.array()).matrix();
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
      break;
    // predictor
    dy = llt.solve(X.transpose() * q.cwiseProduct(r));
    dx = q.cwiseProduct(X * dy - r);
    ds = -dx;
    dz = -z.cwiseProduct(dx.cwiseQuotient(a) + Eigen::VectorXd::Ones(n));
    dw = -w.cwiseProduct(ds.cwiseQuotient(s) + Eigen::VectorXd::Ones(n));

    double fp = std::min(1.0, step_frac * std::min(max_step(a, dx), max_step(s, ds)));
    double fd = std::min(1.0, step_frac * std::min(max_step(z, dz), max_step(w, dw)));

    if (std::min(fp, fd) < 1.0) {
      // corrector with centering
      double mu = z.dot(a) + w.dot(s);
      const double g = (z + fd * dz).dot(a + fp * dx) + (w + fd * dw).dot(s + fp * ds);
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));

      const Eigen::VectorXd dxdz = dx.cwiseProduct(dz);
      const Eigen::VectorXd dsdw = ds.cwiseProduct(dw);
      const Eigen::VectorXd xi =
        (Eigen::VectorXd::Constant(n, mu) - dxdz).cwiseQuotient(a) -
        (Eigen::VectorXd::Constant(n, mu) - dsdw).cwiseQuotient(s);
      dy = llt.solve(X.transpose() * q.cwiseProduct(r - xi));
      dx = q.cwiseProduct(X * dy - r + xi);
      ds = -dx;
      dz = (Eigen::VectorXd::Constant(n, mu) - dxdz - z.cwiseProduct(dx))
             .cwiseQuotient(a) - z;
      dw = (Eigen::VectorXd::Constant(n, mu) - dsdw - w.cwiseProduct(ds))
             .cwiseQuotient(s) - w;

      fp = std::min(1.0, step_frac * std::min(max_step(a, dx), max_step(s, ds)));
      fd = std::min(1.0, step_frac * std::min(max_step(z, dz), max_step(w, dw)));
    }

    if (!(fp > 1e-14) && !(fd > 1e-14))
      break; // stalled

    const Eigen::VectorXd d_prev = d;
    a += fp * dx;
    s += fp * ds;
    d += fd * dy;
    z += fd * dz;
    w += fd * dw;
    const double gap = c.dot(a) - b.dot(d) + w.sum();
    if (!std::isfinite(gap) || !d.allFinite()) {
      d = d_prev; // keep the last finite iterate
      break;
    }
    out.gap = gap;
    // round-off floor: a small gap that stopped shrinking
    if (out.gap < 0.5 * best_gap) {
      best_gap = out.gap;
      stalled = 0;
    } else if (out.gap <= 1e-6 * scale && ++stalled >= 5) {
      break;
    }
  }
  out.beta = -d;
  return out;
}

// Basic solution through the k observations with the smallest residuals
// whose design rows are linearly independent.
bool
polish_vertex(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const Eigen::VectorXd& beta, Eigen::VectorXd& vertex,
              std::vector<Eigen::Index>& basis)
{
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  const Eigen::VectorXd resid = y - X * beta;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return std::abs(resid[i]) < std::abs(resid[j]);
  });

  basis.clear();
  Eigen::MatrixXd ortho(k, k);
  for (Eigen::Index idx : order) {
    Eigen::VectorXd v = X.row(idx).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0)
      continue;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(basis.size()); ++j)
      v -= ortho.col(j).dot(v) * ortho.col(j);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(basis.size()); ++j)
      v -= ortho.col(j).dot(v) * ortho.col(j);
    const double norm = v.norm();
    if (norm <= 1e-8 * norm0)
      continue;
    ortho.col(static_cast<Eigen::Index>(basis.size())) = v / norm;
    basis.push_back(idx);
    if (static_cast<Eigen::Index>(basis.size()) == k)
      break;
  }
  if (static_cast<Eigen::Index>(basis.size()) < k)
    return false;

  Eigen::MatrixXd Xh(k, k);
  Eigen::VectorXd yh(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Xh.row(j) = X.row(basis[j]);
    yh[j] = y[basis[j]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Xh);
  if (!lu.isInvertible())
    return false;
  vertex = lu.solve(yh);
  return vertex.allFinite();
}

// Multipliers a_h in [tau - 1, tau] that zero the subgradient at the vertex.
bool
vertex_is_optimal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                  const Eigen::VectorXd& vertex,
                  const std::vector<Eigen::Index>& basis, double tol)
{
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  const Eigen::VectorXd resid = y - X * vertex;
  std::vector<char> in_basis(n, 0);
  for (auto i : basis)
    in_basis[i] = 1;
  const double zero_tol = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (in_basis[i])
      continue;
    double psi = 0.0;
    if (resid[i] > zero_tol)
      psi = tau;
    else if (resid[i] < -zero_tol)
      psi = tau - 1.0;
    g += psi * X.row(i).transpose();
  }
  Eigen::MatrixXd Xh(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    Xh.row(j) = X.row(basis[j]);
  const Eigen::VectorXd mult = Xh.transpose().fullPivLu().solve(-g);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(mult[j] >= tau - 1.0 - tol && mult[j] <= tau + tol))
      return false;
  }
  return true;
}

} // namespace

double
weighted_check_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, double tau,
                    const Eigen::VectorXd& beta)
{
  const Eigen::VectorXd r = y - X * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    total += w[i] * r[i] * (tau - (r[i] < 0.0 ? 1.0 : 0.0));
  return total;
}

QuantileSolution
solve_weighted_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, double tau,
                        const QuantileSolverOptions& opts)
{
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("quantile level must lie in (0, 1)");
  if (X.rows() != y.size() || w.size() != y.size())
    throw std::invalid_argument("solve_weighted_quantile: size mismatch");
  if (X.rows() < X.cols())
    throw IdentificationError("solve_weighted_quantile: fewer observations "
                              "than coefficients");
  if ((w.array() <= 0.0).any())
    throw std::invalid_argument("solve_weighted_quantile: weights must be "
                                "positive");

  // rho_tau is positively homogeneous, so weights fold into the rows;
  // columns are equilibrated to unit norm and the solution mapped back.
  Eigen::MatrixXd Xw = X.array().colwise() * w.array();
  const Eigen::VectorXd yw = y.cwiseProduct(w);
  Eigen::VectorXd col_scale(Xw.cols());
  for (Eigen::Index j = 0; j < Xw.cols(); ++j) {
    const double nj = Xw.col(j).norm();
    col_scale[j] = nj > 0.0 ? 1.0 / nj : 1.0;
    Xw.col(j) *= col_scale[j];
  }

  Ipm ipm = interior_point(Xw, yw, tau, opts);
  QuantileSolution sol;
  sol.iterations = ipm.iterations;
  if (!ipm.beta.allFinite())
    throw ConvergenceError("quantile solver diverged", std::nan(""));
  const Eigen::VectorXd ipm_beta = ipm.beta.cwiseProduct(col_scale);
  const double ipm_obj = weighted_check_loss(X, y, w, tau, ipm_beta);

  Eigen::VectorXd vertex;
  std::vector<Eigen::Index> basis;
  if (polish_vertex(Xw, yw, ipm.beta, vertex, basis)) {
    const Eigen::VectorXd v_beta = vertex.cwiseProduct(col_scale);
    const double v_obj = weighted_check_loss(X, y, w, tau, v_beta);
    if (v_obj <= ipm_obj + 1e-10 * (1.0 + std::abs(ipm_obj)) &&
        vertex_is_optimal(Xw, yw, tau, vertex, basis, opts.kkt_tol)) {
      sol.beta = v_beta;
      sol.objective = v_obj;
      sol.vertex = true;
      return sol;
    }
  }
  const double scale = 1.0 + yw.cwiseAbs().sum();
  if (ipm.gap <= 1e-8 * scale) {
    sol.beta = ipm_beta;
    sol.objective = ipm_obj;
    return sol;
  }
  throw ConvergenceError("quantile solver did not reach the optimality "
                         "tolerance",
                         ipm_obj);
}

} // namespace rkd
