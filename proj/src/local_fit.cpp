#include "rkd/local_fit.hpp"

#include "rkd/errors.hpp"
#include "rkd/sample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rkd {

void
Sample::validate() const
{
  if (x.size() == 0)
    throw std::invalid_argument("sample is empty");
  if (y.size() != x.size() || (b && b->size() != x.size()))
    throw std::invalid_argument("sample columns differ in length");
  if (!x.allFinite() || !y.allFinite() || (b && !b->allFinite()))
    throw std::invalid_argument("sample contains non-finite entries");
}

double
ConstrainedFit::right_derivative(int nu) const
{
  return std::tgamma(nu + 1.0) * coeffs[2 * nu - 1];
}

double
ConstrainedFit::left_derivative(int nu) const
{
  return std::tgamma(nu + 1.0) * coeffs[2 * nu];
}

double
ConstrainedFit::fitted(double xv) const
{
  Eigen::VectorXd r = basis_vector(p, xv - x0);
  return r.dot(coeffs);
}

namespace {

// Design on the column-equilibrated basis r_p((x - x0)/scale) restricted to
// observations with positive weight.
struct LocalDesign
{
  Eigen::MatrixXd X;
  Eigen::VectorXd w;
  std::vector<Eigen::Index> rows;
  double scale = 1.0;
  int left = 0;
  int right = 0;
};

LocalDesign
build_design(const Eigen::VectorXd& x, double x0, int p, double h,
             const KernelSpec* kernel)
{
  if (p < 1)
    throw std::invalid_argument("polynomial order must be >= 1");
  LocalDesign d;
  const bool global = !std::isfinite(h);
  if (!global && !(h > 0.0))
    throw std::invalid_argument("bandwidth must be positive");
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double wi = global ? 1.0 : (*kernel)((x[i] - x0) / h);
    if (wi > 0.0) {
      d.rows.push_back(i);
      weights.push_back(wi);
      if (x[i] >= x0)
        ++d.right;
      else
        ++d.left;
    }
  }
  if (d.left < p + 1 || d.right < p + 1) {
    std::ostringstream msg;
    msg << "insufficient support around the kink: " << d.left << " left / "
        << d.right << " right observations for order " << p;
    throw IdentificationError(msg.str());
  }
  if (global) {
    double reach = 0.0;
    for (auto i : d.rows)
      reach = std::max(reach, std::abs(x[i] - x0));
    d.scale = reach > 0.0 ? reach : 1.0;
  } else {
    d.scale = h;
  }
  const Eigen::Index m = static_cast<Eigen::Index>(d.rows.size());
  d.X.resize(m, basis_size(p));
  d.w.resize(m);
  Eigen::VectorXd r(basis_size(p));
  for (Eigen::Index j = 0; j < m; ++j) {
    fill_basis(p, (x[d.rows[j]] - x0) / d.scale, r.data());
    d.X.row(j) = r.transpose();
    d.w[j] = weights[j];
  }
  return d;
}

// Converts coefficients on r((x-x0)/s) back to running-variable units.
Eigen::VectorXd
unscale(const Eigen::VectorXd& beta, int p, double s)
{
  Eigen::VectorXd out = beta;
  double f = 1.0;
  for (int k = 1; k <= p; ++k) {
    f /= s;
    out[2 * k - 1] *= f;
    out[2 * k] *= f;
  }
  return out;
}

ConstrainedFit
solve_wls(const Eigen::VectorXd& z, const Eigen::VectorXd& x, double x0, int p,
          double h, const KernelSpec* kernel)
{
  if (z.size() != x.size())
    throw std::invalid_argument("fit: length mismatch between outcome and x");
  LocalDesign d = build_design(x, x0, p, h, kernel);
  const Eigen::Index m = d.X.rows();
  Eigen::VectorXd sw = d.w.cwiseSqrt();
  Eigen::MatrixXd A = d.X.array().colwise() * sw.array();
  Eigen::VectorXd rhs(m);
  for (Eigen::Index j = 0; j < m; ++j)
    rhs[j] = z[d.rows[j]] * sw[j];

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const int k = basis_size(p);
  Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  // equilibrate columns so the check does not depend on units
  for (int c = 0; c < k; ++c) {
    const double norm = R.col(c).norm();
    if (norm > 0.0)
      R.col(c) /= norm;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  const double cond_gram = smin > 0.0 ? std::pow(sv[0] / smin, 2)
                                      : std::numeric_limits<double>::infinity();
  if (!(cond_gram <= 1e12)) {
    std::ostringstream msg;
    msg << "weighted Gram matrix is ill-conditioned (condition number "
        << cond_gram << ")";
    throw IllConditionedError(msg.str());
  }
  Eigen::VectorXd beta = qr.solve(rhs);

  ConstrainedFit fit;
  fit.p = p;
  fit.x0 = x0;
  fit.h = h;
  fit.coeffs = unscale(beta, p, d.scale);
  fit.n_eff_left = d.left;
  fit.n_eff_right = d.right;
  fit.objective = (A * beta - rhs).squaredNorm();
  return fit;
}

ConstrainedFit
solve_quantile(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double tau,
               double x0, int p, double h, const KernelSpec* kernel,
               const QuantileSolverOptions& opts)
{
  if (y.size() != x.size())
    throw std::invalid_argument("fit: length mismatch between outcome and x");
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("quantile level must lie in (0, 1)");
  LocalDesign d = build_design(x, x0, p, h, kernel);
  Eigen::VectorXd ys(d.X.rows());
  for (Eigen::Index j = 0; j < ys.size(); ++j)
    ys[j] = y[d.rows[j]];
  QuantileSolution sol = solve_weighted_quantile(d.X, ys, d.w, tau, opts);

  ConstrainedFit fit;
  fit.p = p;
  fit.x0 = x0;
  fit.h = h;
  fit.coeffs = unscale(sol.beta, p, d.scale);
  fit.n_eff_left = d.left;
  fit.n_eff_right = d.right;
  fit.objective = sol.objective;
  return fit;
}

} // namespace

ConstrainedFit
fit_constrained_wls(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                    double x0, int p, double h, const KernelSpec& kernel)
{
  if (!std::isfinite(h) || !(h > 0.0))
    throw std::invalid_argument("bandwidth must be positive and finite");
  return solve_wls(z, x, x0, p, h, &kernel);
}

ConstrainedFit
fit_global_wls(const Eigen::VectorXd& z, const Eigen::VectorXd& x, double x0,
               int p)
{
  return solve_wls(z, x, x0, p, std::numeric_limits<double>::infinity(), nullptr);
}

ConstrainedFit
fit_constrained_quantile(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                         double tau, double x0, int p, double h,
                         const KernelSpec& kernel,
                         const QuantileSolverOptions& opts)
{
  if (!std::isfinite(h) || !(h > 0.0))
    throw std::invalid_argument("bandwidth must be positive and finite");
  return solve_quantile(y, x, tau, x0, p, h, &kernel, opts);
}

ConstrainedFit
fit_global_quantile(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                    double tau, double x0, int p,
                    const QuantileSolverOptions& opts)
{
  return solve_quantile(y, x, tau, x0, p,
                        std::numeric_limits<double>::infinity(), nullptr, opts);
}

Eigen::VectorXd
rearrange_monotone(const Eigen::VectorXd& taus, const Eigen::VectorXd& values)
{
  if (taus.size() != values.size())
    throw std::invalid_argument("rearrange_monotone: length mismatch");
  for (Eigen::Index i = 1; i < taus.size(); ++i) {
    if (!(taus[i] > taus[i - 1]))
      throw std::invalid_argument("rearrange_monotone: grid must be strictly "
                                  "increasing");
  }
  Eigen::VectorXd out = values;
  std::sort(out.data(), out.data() + out.size());
  return out;
}

Eigen::VectorXd
residuals(const ConstrainedFit& fit, const Eigen::VectorXd& z,
          const Eigen::VectorXd& x)
{
  if (z.size() != x.size())
    throw std::invalid_argument("residuals: length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.size());
  Eigen::VectorXd r(basis_size(fit.p));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double u = x[i] - fit.x0;
    if (std::abs(u) <= fit.h) {
      fill_basis(fit.p, u, r.data());
      out[i] = z[i] - r.dot(fit.coeffs);
    }
  }
  return out;
}

double
one_sided_local_linear(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                       double x0, bool right, double h, const KernelSpec& kernel)
{
  const bool global = !std::isfinite(h);
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  int count = 0;
  // Centered at x0 and scaled by the bandwidth for conditioning.
  double scale = global ? 1.0 : h;
  if (global) {
    double reach = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      reach = std::max(reach, std::abs(x[i] - x0));
    scale = reach > 0.0 ? reach : 1.0;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool side = x[i] >= x0;
    if (side != right)
      continue;
    const double u = (x[i] - x0) / scale;
    const double wi = global ? 1.0 : kernel((x[i] - x0) / h);
    if (!(wi > 0.0))
      continue;
    ++count;
    s0 += wi;
    s1 += wi * u;
    s2 += wi * u * u;
    t0 += wi * z[i];
    t1 += wi * u * z[i];
  }
  const double det = s0 * s2 - s1 * s1;
  if (count < 2 || !(det > 1e-14 * s0 * s2))
    throw IdentificationError("one-sided local linear fit lacks support");
  return (s2 * t0 - s1 * t1) / det;
}

} // namespace rkd
