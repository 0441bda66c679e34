#include "rkd/density.hpp"

#include "rkd/errors.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rkd {

double
sample_sd(const Eigen::VectorXd& v)
{
  const double n = static_cast<double>(v.size());
  if (v.size() < 2)
    return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / (n - 1.0));
}

double
sample_quantile(const Eigen::VectorXd& v, double prob)
{
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const double pos = prob * (static_cast<double>(s.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double
rule_of_thumb_vn(const Eigen::VectorXd& x)
{
  if (x.size() < 10)
    throw std::invalid_argument("rule_of_thumb_vn: need at least 10 observations");
  const double sd = sample_sd(x);
  const double iqr = sample_quantile(x, 0.75) - sample_quantile(x, 0.25);
  double spread = std::min(sd, iqr / 1.349);
  if (!(spread > 0.0))
    spread = sd; // IQR can vanish on heavily tied data
  if (!(spread > 0.0))
    throw std::invalid_argument("rule_of_thumb_vn: running variable is constant");
  return 2.576 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

double
kde_at(const Eigen::VectorXd& x, double x0, const KernelSpec& kernel, double vn)
{
  if (!(vn > 0.0))
    throw std::invalid_argument("kde_at: bandwidth must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    total += kernel((x[i] - x0) / vn);
  return total / (static_cast<double>(x.size()) * vn);
}

ConditionalBandwidths
bashtannyk_hyndman_bandwidths(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                              const KernelSpec& kernel, double c, double b)
{
  using std::numbers::pi;
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("bashtannyk_hyndman_bandwidths: need matching "
                                "samples of size >= 3");
  const double sx = sample_sd(x);
  const double sy = sample_sd(y);
  if (!(sx > 0.0) || !(sy > 0.0))
    throw std::invalid_argument("bashtannyk_hyndman_bandwidths: degenerate "
                                "regression (constant x or y)");
  // OLS slope of y on (1, x)
  const double mx = x.mean(), my = y.mean();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double sxx = (x.array() - mx).square().sum();
  const double slope = sxy / sxx;

  const boost::math::normal std_normal;
  const double lambda = 2.0 * boost::math::cdf(std_normal, c) - 1.0;
  const double rk = kernel_roughness(kernel);
  const double rho_k = kernel_second_moment(kernel);
  const double n = static_cast<double>(x.size());

  const double v = std::sqrt(2.0 * pi) * std::pow(sx, 3) *
                     (3.0 * slope * sx * sx + 8.0 * sy * sy) * lambda -
                   16.0 * c * sx * sx * sy * sy * std::exp(-c * c / 2.0);
  if (!(v > 0.0))
    throw RkdError("bashtannyk_hyndman_bandwidths: v(c) is not positive for "
                   "this sample; try a larger constant c");

  // sigma_x^58 underflows only for absurd scales; evaluate in logs anyway.
  const double log_inner1 = std::log(288.0) + 9.0 * std::log(pi) +
                            58.0 * std::log(sx) + 2.0 * std::log(lambda);
  const double inner1 = std::exp(log_inner1 / 8.0);
  const double inner2 =
    std::pow(18.0 * pi * std::pow(sx, 10) * lambda * lambda, 0.25);
  const double num = 16.0 * c * rk * rk * std::pow(sy, 5) * inner1;
  const double den = std::pow(rho_k, 4) * std::pow(b, 2.5) * std::pow(v, 0.75) *
                     (std::sqrt(v) + b * inner2);
  ConditionalBandwidths out;
  out.c = c;
  out.h2 = std::pow(num / den, 1.0 / 6.0) * std::pow(n, -1.0 / 6.0);
  out.h1 = std::pow(b * b * v /
                      (3.0 * std::sqrt(2.0 * pi) * std::pow(sx, 5) * lambda),
                    0.25) *
           out.h2;
  return out;
}

ConditionalBandwidths
reference_rule_bandwidths(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                          const KernelSpec& kernel, double c, double b,
                          std::vector<std::string>* notes)
{
  try {
    return bashtannyk_hyndman_bandwidths(y, x, kernel, c, b);
  } catch (const RkdError&) {
    if (c >= 3.0)
      throw;
  }
  if (notes)
    notes->push_back("conditional density bandwidths: v(c) <= 0 at c = " +
                     std::to_string(c) + ", used c = 3");
  return bashtannyk_hyndman_bandwidths(y, x, kernel, 3.0, b);
}

double
conditional_density(double y0, double x0, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& x, const KernelSpec& kernel, double h1,
                    double h2)
{
  if (!(h1 > 0.0) || !(h2 > 0.0))
    throw std::invalid_argument("conditional_density: bandwidths must be positive");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double kx = kernel((x[i] - x0) / h2);
    if (kx <= 0.0)
      continue;
    den += kx;
    num += kernel((y[i] - y0) / h1) * kx;
  }
  if (!(den > 0.0))
    throw EmptyWindowError("conditional_density: no observations within h2 of x0");
  return num / (h1 * den);
}

DensityEstimates
estimate_densities(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double x0,
                   const KernelSpec& kernel, const Eigen::VectorXd& y_grid,
                   double c, double b)
{
  DensityEstimates out;
  out.vn = rule_of_thumb_vn(x);
  out.fx_at_x0 = kde_at(x, x0, kernel, out.vn);
  if (!(out.fx_at_x0 > 0.0))
    throw RkdError("estimated density of the running variable at the kink is "
                   "zero");
  const auto bw = reference_rule_bandwidths(y, x, kernel, c, b, &out.notes);
  out.h1 = bw.h1;
  out.h2 = bw.h2;
  out.y_grid = y_grid;
  out.fyx.resize(y_grid.size());
  for (Eigen::Index j = 0; j < y_grid.size(); ++j)
    out.fyx[j] = conditional_density(y_grid[j], x0, y, x, kernel, bw.h1, bw.h2);
  return out;
}

} // namespace rkd
