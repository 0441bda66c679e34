#include "rkd/bandwidth.hpp"

#include "rkd/density.hpp"
#include "rkd/errors.hpp"
#include "rkd/local_fit.hpp"
#include "rkd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rkd {

namespace {

constexpr double bias_floor = 1e-12;
constexpr double variance_floor = 1e-12;

double
factorial(int k)
{
  return std::tgamma(k + 1.0);
}

std::string
describe(const char* what, double point, const std::string& detail)
{
  std::ostringstream s;
  s << what << " at " << point << ": " << detail;
  return s.str();
}

// Applies the clamp, recording why a bound was hit.
double
clamp_bandwidth(double raw, const BandwidthClamp& clamp, const char* stage,
                double point, std::vector<std::string>& warnings)
{
  if (!std::isfinite(raw) || raw >= clamp.upper) {
    if (!std::isfinite(raw) || raw > clamp.upper)
      warnings.push_back(describe(stage, point, "clamped to the data range"));
    return clamp.upper;
  }
  if (raw < clamp.lower) {
    warnings.push_back(describe(stage, point, "raised to the lower clamp"));
    return clamp.lower;
  }
  return raw;
}

double
floored_variance(double v, const char* side, double point,
                 std::vector<std::string>& warnings)
{
  if (!(v > variance_floor)) {
    warnings.push_back(
      describe("error variance", point, std::string(side) + " side floored"));
    return variance_floor;
  }
  return v;
}

// Plug-in rule with the degenerate-bias guard: returns +inf (later clamped
// to the upper bound) when B^2 is numerically zero.
double
guarded_bandwidth(const AmseConstants& c, std::int64_t n, int nu, int order,
                  const char* stage, double point,
                  std::vector<std::string>& warnings)
{
  if (!(c.bias * c.bias >= bias_floor)) {
    warnings.push_back(
      describe(stage, point, "bias constant is numerically zero"));
    return std::numeric_limits<double>::infinity();
  }
  return amse_optimal_bandwidth(c, n, nu, order);
}

// Highest-order slot of a fit divided by k!, as the selector prescribes.
double
extracted_derivative(const ConstrainedFit& fit, int k, bool right)
{
  const double coeff = fit.coeffs[right ? 2 * k - 1 : 2 * k];
  return coeff / factorial(k);
}

} // namespace

AmseConstants
amse_bias_variance(double deriv_plus, double deriv_minus,
                   const KernelConstants& constants, double sigma2_plus,
                   double sigma2_minus, double fx, int nu)
{
  const int p = constants.p;
  if (!(fx > 0.0))
    throw std::invalid_argument("amse_bias_variance: density must be positive");
  if (nu < 1 || nu > p)
    throw std::invalid_argument("amse_bias_variance: need 1 <= nu <= p");
  auto tp = constants.theta_plus.find(p + 1);
  auto tm = constants.theta_minus.find(p + 1);
  if (tp == constants.theta_plus.end() || tm == constants.theta_minus.end())
    throw std::invalid_argument("amse_bias_variance: moments of order p+1 "
                                "are missing from the constants");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(basis_size(p));
  s[2 * nu - 1] = 1.0;
  s[2 * nu] = -1.0;
  const Eigen::VectorXd g = constants.gamma_inv * s;

  AmseConstants out;
  const Eigen::VectorXd moment =
    deriv_plus * tp->second + deriv_minus * tm->second;
  out.bias = g.dot(moment) / factorial(p + 1);
  const Eigen::MatrixXd xi =
    sigma2_plus * constants.psi_plus + sigma2_minus * constants.psi_minus;
  out.variance = g.dot(xi * g) / fx;
  return out;
}

double
amse_optimal_bandwidth(const AmseConstants& c, std::int64_t n, int nu, int p)
{
  const double k = (1.0 + 2.0 * nu) / (2.0 * (p + 1 - nu));
  const double e = 1.0 / (2.0 * p + 3.0);
  return std::pow(k * c.variance / (c.bias * c.bias), e) *
         std::pow(static_cast<double>(n), -e);
}

std::vector<std::string>
BandwidthSchedule::all_warnings() const
{
  std::vector<std::string> out = notes;
  for (const auto& c : components)
    out.insert(out.end(), c.warnings.begin(), c.warnings.end());
  return out;
}

BandwidthClamp
bandwidth_clamp(const Eigen::VectorXd& x, double x0, int min_side)
{
  const Eigen::Index n = x.size();
  if (n < 2)
    throw std::invalid_argument("bandwidth_clamp: need at least two points");
  std::vector<double> left, right, all(x.data(), x.data() + n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[i] >= x0)
      right.push_back(x[i] - x0);
    else
      left.push_back(x0 - x[i]);
  }
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  std::sort(all.begin(), all.end());

  BandwidthClamp out;
  out.upper = all.back() - all.front();

  // spacings among the observations closest to x0
  const std::size_t m =
    std::min<std::size_t>(all.size(), std::max<std::size_t>(20, all.size() / 20));
  std::vector<double> near(all.begin(), all.end());
  std::nth_element(near.begin(), near.begin() + static_cast<long>(m - 1),
                   near.end(), [x0](double a, double b) {
                     return std::abs(a - x0) < std::abs(b - x0);
                   });
  near.resize(m);
  std::sort(near.begin(), near.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < near.size(); ++i)
    gaps.push_back(near[i] - near[i - 1]);
  double median_gap = 0.0;
  if (!gaps.empty()) {
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2),
                     gaps.end());
    median_gap = gaps[gaps.size() / 2];
  }
  out.lower = 5.0 * median_gap;

  const auto side_reach = [min_side](const std::vector<double>& d) {
    if (min_side <= 0 || d.empty())
      return 0.0;
    const std::size_t k = std::min<std::size_t>(d.size(),
                                                static_cast<std::size_t>(min_side));
    return d[k - 1] * (1.0 + 1e-9) + 1e-300;
  };
  out.lower = std::max({ out.lower, side_reach(left), side_reach(right) });
  out.upper = std::max(out.upper, out.lower);
  return out;
}

namespace {

PointComponents
type1_point(const Eigen::VectorXd& z, const Eigen::VectorXd& x, double x0,
            int p, int q, const KernelSpec& kernel, double fx, std::int64_t n,
            const BandwidthClamp& pilot_clamp, const BandwidthClamp& main_clamp,
            double point)
{
  PointComponents pc;
  pc.fx = fx;
  const auto cq = cached_constants(kernel, q);
  const auto cp = cached_constants(kernel, p);
  const double inf = std::numeric_limits<double>::infinity();

  // pilot: global fit of order q+1 and unweighted one-sided variance fits
  {
    StageComponents& s = pc.pilot;
    const ConstrainedFit g = fit_global_wls(z, x, x0, q + 1);
    s.level = g.level();
    s.deriv_plus = extracted_derivative(g, q + 1, true);
    s.deriv_minus = extracted_derivative(g, q + 1, false);
    const Eigen::VectorXd e2 = residuals(g, z, x).array().square();
    s.sigma2_plus = floored_variance(
      one_sided_local_linear(e2, x, x0, true, inf, kernel), "right", point,
      pc.warnings);
    s.sigma2_minus = floored_variance(
      one_sided_local_linear(e2, x, x0, false, inf, kernel), "left", point,
      pc.warnings);
    const AmseConstants c = amse_bias_variance(
      s.deriv_plus, s.deriv_minus, *cq, s.sigma2_plus, s.sigma2_minus, fx, p + 1);
    s.bias = c.bias;
    s.variance = c.variance;
    s.raw_bandwidth =
      guarded_bandwidth(c, n, p + 1, q, "pilot bandwidth", point, pc.warnings);
    s.bandwidth = clamp_bandwidth(s.raw_bandwidth, pilot_clamp,
                                  "pilot bandwidth", point, pc.warnings);
  }
  // main: local fit of order p+1 at the pilot, kernel-weighted variance fits
  {
    StageComponents& s = pc.main;
    const double b = pc.pilot.bandwidth;
    const ConstrainedFit f = fit_constrained_wls(z, x, x0, p + 1, b, kernel);
    s.level = f.level();
    s.deriv_plus = extracted_derivative(f, p + 1, true);
    s.deriv_minus = extracted_derivative(f, p + 1, false);
    const Eigen::VectorXd e2 = residuals(f, z, x).array().square();
    s.sigma2_plus = floored_variance(
      one_sided_local_linear(e2, x, x0, true, b, kernel), "right", point,
      pc.warnings);
    s.sigma2_minus = floored_variance(
      one_sided_local_linear(e2, x, x0, false, b, kernel), "left", point,
      pc.warnings);
    const AmseConstants c = amse_bias_variance(
      s.deriv_plus, s.deriv_minus, *cp, s.sigma2_plus, s.sigma2_minus, fx, 1);
    s.bias = c.bias;
    s.variance = c.variance;
    s.raw_bandwidth =
      guarded_bandwidth(c, n, 1, p, "main bandwidth", point, pc.warnings);
    s.bandwidth = clamp_bandwidth(s.raw_bandwidth, main_clamp,
                                  "main bandwidth", point, pc.warnings);
  }
  return pc;
}

void
check_orders(int p, int q)
{
  if (p < 1)
    throw ConfigError("polynomial order p must be at least 1");
  if (q <= p)
    throw ConfigError("pilot order q must exceed p");
}

BandwidthSchedule
empty_schedule(const Eigen::VectorXd& grid, std::int64_t n, int p, int q,
               const BandwidthClamp& clamp)
{
  BandwidthSchedule s;
  s.grid = grid;
  s.pilot.resize(grid.size());
  s.main.resize(grid.size());
  s.components.resize(static_cast<std::size_t>(grid.size()));
  s.n = n;
  s.p = p;
  s.q = q;
  s.lower_clamp = clamp.lower;
  s.upper_clamp = clamp.upper;
  return s;
}

} // namespace

BandwidthSchedule
algorithm1_bandwidths(const Sample& sample, double x0,
                      const Eigen::VectorXd& theta_grid, OutcomeTransform phi,
                      int p, int q, const KernelSpec& kernel)
{
  check_orders(p, q);
  sample.validate();
  const Eigen::VectorXd grid = phi == OutcomeTransform::identity
                                 ? Eigen::VectorXd::Zero(1)
                                 : theta_grid;
  if (grid.size() == 0)
    throw ConfigError("evaluation grid is empty");
  const std::int64_t n = sample.size();
  const double fx = kde_at(sample.x, x0, kernel, rule_of_thumb_vn(sample.x));
  if (!(fx > 0.0))
    throw RkdError("estimated density of the running variable at the kink is "
                   "zero");
  // the main-stage fit has order p+1; the final estimator has order p
  const BandwidthClamp pilot_clamp = bandwidth_clamp(sample.x, x0, p + 3);
  const BandwidthClamp main_clamp = bandwidth_clamp(sample.x, x0, p + 2);

  BandwidthSchedule out = empty_schedule(grid, n, p, q, main_clamp);
  parallel_for(static_cast<std::size_t>(grid.size()), [&](std::size_t j) {
    const auto k = static_cast<Eigen::Index>(j);
    Eigen::VectorXd z = phi == OutcomeTransform::identity
                          ? sample.y
                          : Eigen::VectorXd(
                              (sample.y.array() <= grid[k]).cast<double>());
    try {
      out.components[j] = type1_point(z, sample.x, x0, p, q, kernel, fx, n,
                                       pilot_clamp, main_clamp, grid[k]);
    } catch (const RkdError& e) {
      throw RkdError(describe("bandwidth selection", grid[k], e.what()));
    }
    out.pilot[k] = out.components[j].pilot.bandwidth;
    out.main[k] = out.components[j].main.bandwidth;
  });
  return out;
}

namespace {

struct QuantileContext
{
  const Sample& sample;
  double x0;
  int p;
  int q;
  const KernelSpec& kernel;
  const QuantileSelectorOptions& opts;
  double fx;
  ConditionalBandwidths bh;
  BandwidthClamp pilot_clamp;
  BandwidthClamp main_clamp;
  std::vector<std::string> notes;
};

double
density_at(const QuantileContext& ctx, double y)
{
  return conditional_density(y, ctx.x0, ctx.sample.y, ctx.sample.x, ctx.kernel,
                             ctx.bh.h1, ctx.bh.h2);
}

// Quantile variance entering both one-sided slots: u(1-u) / f_{Y|X}^k.
double
quantile_sigma2(const QuantileContext& ctx, double u, double fyx, double point,
                std::vector<std::string>& warnings)
{
  if (!(fyx > 0.0)) {
    warnings.push_back(describe("conditional density", point, "is zero"));
    return std::numeric_limits<double>::infinity();
  }
  return u * (1.0 - u) / std::pow(fyx, ctx.opts.density_power);
}

PointComponents
quantile_point(const QuantileContext& ctx, double u)
{
  PointComponents pc;
  pc.fx = ctx.fx;
  const std::int64_t n = ctx.sample.size();
  const auto cq = cached_constants(ctx.kernel, ctx.q);
  const auto cp = cached_constants(ctx.kernel, ctx.p);
  const Eigen::VectorXd& y = ctx.sample.y;
  const Eigen::VectorXd& x = ctx.sample.x;

  auto finish = [&](StageComponents& s, const KernelConstants& c, int nu,
                    int order, const BandwidthClamp& clamp, const char* stage) {
    const double s2 = quantile_sigma2(ctx, u, s.fyx, u, pc.warnings);
    s.sigma2_plus = s2;
    s.sigma2_minus = s2;
    if (!std::isfinite(s2)) {
      AmseConstants a{ 0.0, std::numeric_limits<double>::infinity() };
      s.bias = amse_bias_variance(s.deriv_plus, s.deriv_minus, c, 0.0, 0.0,
                                  ctx.fx, nu).bias;
      s.variance = a.variance;
      s.raw_bandwidth = std::numeric_limits<double>::infinity();
    } else {
      const AmseConstants a = amse_bias_variance(s.deriv_plus, s.deriv_minus, c,
                                                 s2, s2, ctx.fx, nu);
      s.bias = a.bias;
      s.variance = a.variance;
      s.raw_bandwidth = guarded_bandwidth(a, n, nu, order, stage, u, pc.warnings);
    }
    s.bandwidth = clamp_bandwidth(s.raw_bandwidth, clamp, stage, u, pc.warnings);
  };

  {
    StageComponents& s = pc.pilot;
    const ConstrainedFit g =
      fit_global_quantile(y, x, u, ctx.x0, ctx.q + 1, ctx.opts.solver);
    s.level = g.level();
    s.deriv_plus = extracted_derivative(g, ctx.q + 1, true);
    s.deriv_minus = extracted_derivative(g, ctx.q + 1, false);
    s.fyx = density_at(ctx, s.level);
    finish(s, *cq, ctx.p + 1, ctx.q, ctx.pilot_clamp, "pilot bandwidth");
  }
  {
    StageComponents& s = pc.main;
    const ConstrainedFit f =
      fit_constrained_quantile(y, x, u, ctx.x0, ctx.p + 1, pc.pilot.bandwidth,
                               ctx.kernel, ctx.opts.solver);
    s.level = f.level();
    s.deriv_plus = extracted_derivative(f, ctx.p + 1, true);
    s.deriv_minus = extracted_derivative(f, ctx.p + 1, false);
    s.fyx = density_at(ctx, s.level);
    finish(s, *cp, 1, ctx.p, ctx.main_clamp, "main bandwidth");
  }
  return pc;
}

BandwidthSchedule
quantile_schedule(const QuantileContext& ctx, const Eigen::VectorXd& grid)
{
  BandwidthSchedule out =
    empty_schedule(grid, ctx.sample.size(), ctx.p, ctx.q, ctx.main_clamp);
  out.density_h1 = ctx.bh.h1;
  out.density_h2 = ctx.bh.h2;
  out.density_c = ctx.bh.c;
  out.notes = ctx.notes;
  parallel_for(static_cast<std::size_t>(grid.size()), [&](std::size_t j) {
    const auto k = static_cast<Eigen::Index>(j);
    try {
      out.components[j] = quantile_point(ctx, grid[k]);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(describe("bandwidth selection", grid[k], e.what()),
                             e.last_objective());
    } catch (const RkdError& e) {
      throw RkdError(describe("bandwidth selection", grid[k], e.what()));
    }
    out.pilot[k] = out.components[j].pilot.bandwidth;
    out.main[k] = out.components[j].main.bandwidth;
  });
  return out;
}

QuantileContext
make_context(const Sample& sample, double x0, int p, int q,
             const KernelSpec& kernel, const QuantileSelectorOptions& opts)
{
  check_orders(p, q);
  sample.validate();
  const double fx = kde_at(sample.x, x0, kernel, rule_of_thumb_vn(sample.x));
  if (!(fx > 0.0))
    throw RkdError("estimated density of the running variable at the kink is "
                   "zero");
  std::vector<std::string> notes;
  const ConditionalBandwidths bh = reference_rule_bandwidths(
    sample.y, sample.x, kernel, opts.bh_constant, opts.bh_b, &notes);
  return QuantileContext{ sample,
                          x0,
                          p,
                          q,
                          kernel,
                          opts,
                          fx,
                          bh,
                          bandwidth_clamp(sample.x, x0, 2 * (p + 2)),
                          bandwidth_clamp(sample.x, x0, 2 * (p + 1)),
                          std::move(notes) };
}

} // namespace

BandwidthSchedule
qrkd_bandwidths(const Sample& sample, double x0, const Eigen::VectorXd& tau_grid,
                int p, int q, const KernelSpec& kernel,
                const QuantileSelectorOptions& opts)
{
  validate_level_grid(tau_grid, "quantile grid");
  const QuantileContext ctx = make_context(sample, x0, p, q, kernel, opts);
  return quantile_schedule(ctx, tau_grid);
}

void
compose_lorenz_amse(const Eigen::VectorXd& u, const Eigen::VectorXd& bias_q,
                    const Eigen::VectorXd& variance_q, const Eigen::VectorXd& y_u,
                    double mu0, const AmseConstants& mean_pieces,
                    const Eigen::VectorXd& tau, Eigen::VectorXd& lorenz,
                    Eigen::VectorXd& bias_l, Eigen::VectorXd& variance_l)
{
  if (!(mu0 > 0.0))
    throw NonpositiveMeanError("baseline mean at the kink is not positive");
  lorenz = integrate_from_zero(u, y_u, tau) / mu0;
  bias_l =
    (integrate_from_zero(u, bias_q, tau) - lorenz * mean_pieces.bias) / mu0;
  variance_l = (integrate_from_zero(u, variance_q, tau) +
                lorenz.array().square().matrix() * mean_pieces.variance) /
               (mu0 * mu0);
}

LorenzBandwidths
LorenzBandwidthSchedule::bandwidths() const
{
  LorenzBandwidths b;
  b.quantile_h = quantile.main;
  b.mean_h = mean.main[0];
  b.lorenz_h = lorenz.main;
  return b;
}

LorenzBandwidthSchedule
algorithm2_lorenz_bandwidths(const Sample& sample, double x0,
                             const Eigen::VectorXd& tau_grid,
                             const Eigen::VectorXd& integration_grid, int p,
                             int q, const KernelSpec& kernel,
                             const QuantileSelectorOptions& opts)
{
  validate_level_grid(tau_grid, "reporting grid");
  validate_level_grid(integration_grid, "integration grid");
  LorenzBandwidthSchedule out;
  out.mean = algorithm1_bandwidths(sample, x0, Eigen::VectorXd::Zero(1),
                                   OutcomeTransform::identity, p, q, kernel);
  const QuantileContext ctx = make_context(sample, x0, p, q, kernel, opts);
  out.quantile = quantile_schedule(ctx, integration_grid);

  const PointComponents& mc = out.mean.components[0];
  out.mu0 = mc.main.level;
  if (!(out.mu0 > 0.0)) {
    std::ostringstream msg;
    msg << "baseline mean at the kink is " << out.mu0
        << "; the Lorenz curve requires a positive mean";
    throw NonpositiveMeanError(msg.str());
  }
  const Eigen::Index m = integration_grid.size();
  Eigen::VectorXd bq(m), vq(m), levels(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& c = out.quantile.components[static_cast<std::size_t>(k)].main;
    bq[k] = c.bias;
    vq[k] = c.variance;
    levels[k] = c.level;
  }
  const Eigen::VectorXd y_u = rearrange_monotone(integration_grid, levels);
  compose_lorenz_amse(integration_grid, bq, vq, y_u, out.mu0,
                      AmseConstants{ mc.main.bias, mc.main.variance }, tau_grid,
                      out.lorenz_curve, out.bias_l, out.variance_l);

  out.lorenz = empty_schedule(tau_grid, sample.size(), p, q, ctx.main_clamp);
  for (Eigen::Index k = 0; k < tau_grid.size(); ++k) {
    auto& pc = out.lorenz.components[static_cast<std::size_t>(k)];
    pc.fx = ctx.fx;
    pc.main.bias = out.bias_l[k];
    pc.main.variance = out.variance_l[k];
    pc.main.level = out.lorenz_curve[k];
    pc.main.raw_bandwidth = guarded_bandwidth(
      AmseConstants{ out.bias_l[k], out.variance_l[k] }, sample.size(), 1, p,
      "Lorenz bandwidth", tau_grid[k], pc.warnings);
    pc.main.bandwidth = clamp_bandwidth(pc.main.raw_bandwidth, ctx.main_clamp,
                                        "Lorenz bandwidth", tau_grid[k],
                                        pc.warnings);
    out.lorenz.pilot[k] = std::numeric_limits<double>::quiet_NaN();
    out.lorenz.main[k] = pc.main.bandwidth;
  }
  return out;
}

} // namespace rkd
