#include "rkd/estimands.hpp"

#include "rkd/errors.hpp"
#include "rkd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rkd {

void
KinkDesign::validate() const
{
  if (!std::isfinite(x0) || !std::isfinite(slope_right) ||
      !std::isfinite(slope_left))
    throw ConfigError("kink design contains non-finite values");
  if (std::abs(gap()) <= 1e-12)
    throw ConfigError("kink gap slope_right - slope_left is zero");
}

std::string
to_string(EffectKind kind)
{
  switch (kind) {
    case EffectKind::mean:
      return "mean";
    case EffectKind::distributional:
      return "distributional";
    case EffectKind::quantile:
      return "quantile";
    case EffectKind::lorenz:
      return "lorenz";
  }
  return "unknown";
}

EffectKind
effect_from_name(const std::string& name)
{
  if (name == "mean")
    return EffectKind::mean;
  if (name == "distributional" || name == "ldte")
    return EffectKind::distributional;
  if (name == "quantile" || name == "qrkd")
    return EffectKind::quantile;
  if (name == "lorenz" || name == "llte")
    return EffectKind::lorenz;
  throw ConfigError("unknown effect '" + name + "'");
}

void
validate_level_grid(const Eigen::VectorXd& grid, const char* what)
{
  if (grid.size() == 0)
    throw ConfigError(std::string(what) + " is empty");
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0))
      throw ConfigError(std::string(what) + " must lie in (0, 1)");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ConfigError(std::string(what) + " must be strictly increasing");
  }
}

Eigen::VectorXd
default_integration_grid()
{
  Eigen::VectorXd u(99);
  for (int i = 0; i < 99; ++i)
    u[i] = (i + 1) / 100.0;
  return u;
}

Eigen::VectorXd
default_reporting_grid()
{
  Eigen::VectorXd t(9);
  for (int i = 0; i < 9; ++i)
    t[i] = (i + 1) / 10.0;
  return t;
}

namespace {

// Rethrows a library error with the offending grid point prepended, keeping
// the exception type.
[[noreturn]] void
rethrow_with_point(const char* label, double point)
{
  std::ostringstream ctx;
  ctx << label << " = " << point << ": ";
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx.str() + e.what(), e.last_objective());
  } catch (const IdentificationError& e) {
    throw IdentificationError(ctx.str() + e.what());
  } catch (const IllConditionedError& e) {
    throw IllConditionedError(ctx.str() + e.what());
  } catch (const EmptyWindowError& e) {
    throw EmptyWindowError(ctx.str() + e.what());
  } catch (const RkdError& e) {
    throw RkdError(ctx.str() + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(ctx.str() + e.what());
  }
}

double
slope_ratio(const ConstrainedFit& fit, const KinkDesign& design)
{
  return (fit.right_derivative(1) - fit.left_derivative(1)) / design.gap();
}

void
check_bandwidths(const Eigen::VectorXd& grid, const Eigen::VectorXd& h)
{
  if (h.size() != grid.size())
    throw std::invalid_argument("one bandwidth per grid point is required");
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0) || !std::isfinite(h[i]))
      throw std::invalid_argument("bandwidths must be positive and finite");
  }
}

} // namespace

EffectCurve
rkd_mean(const Sample& sample, const KinkDesign& design, int p, double h,
         const KernelSpec& kernel)
{
  design.validate();
  sample.validate();
  EffectCurve out;
  out.kind = EffectKind::mean;
  out.grid = Eigen::VectorXd::Zero(1);
  out.bandwidths = Eigen::VectorXd::Constant(1, h);
  ConstrainedFit fit =
    fit_constrained_wls(sample.y, sample.x, design.x0, p, h, kernel);
  out.estimates = Eigen::VectorXd::Constant(1, slope_ratio(fit, design));
  out.mu0 = fit.level();
  out.fits.push_back(std::move(fit));
  return out;
}

EffectCurve
rkd_distributional(const Sample& sample, const KinkDesign& design,
                   const Eigen::VectorXd& y_grid, int p,
                   const Eigen::VectorXd& bandwidths, const KernelSpec& kernel)
{
  design.validate();
  sample.validate();
  check_bandwidths(y_grid, bandwidths);
  const Eigen::Index g = y_grid.size();
  EffectCurve out;
  out.kind = EffectKind::distributional;
  out.grid = y_grid;
  out.bandwidths = bandwidths;
  out.estimates.resize(g);
  out.fits.resize(static_cast<std::size_t>(g));
  parallel_for(static_cast<std::size_t>(g), [&](std::size_t j) {
    const double yv = y_grid[static_cast<Eigen::Index>(j)];
    try {
      Eigen::VectorXd z = (sample.y.array() <= yv).cast<double>();
      out.fits[j] = fit_constrained_wls(z, sample.x, design.x0, p,
                                        bandwidths[static_cast<Eigen::Index>(j)],
                                        kernel);
    } catch (...) {
      rethrow_with_point("y", yv);
    }
    out.estimates[static_cast<Eigen::Index>(j)] =
      slope_ratio(out.fits[j], design);
  });
  return out;
}

EffectCurve
rkd_quantile(const Sample& sample, const KinkDesign& design,
             const Eigen::VectorXd& tau_grid, int p,
             const Eigen::VectorXd& bandwidths, const KernelSpec& kernel,
             const QuantileSolverOptions& opts)
{
  design.validate();
  sample.validate();
  validate_level_grid(tau_grid, "quantile grid");
  check_bandwidths(tau_grid, bandwidths);
  const Eigen::Index g = tau_grid.size();
  EffectCurve out;
  out.kind = EffectKind::quantile;
  out.grid = tau_grid;
  out.bandwidths = bandwidths;
  out.estimates.resize(g);
  out.fits.resize(static_cast<std::size_t>(g));
  parallel_for(static_cast<std::size_t>(g), [&](std::size_t j) {
    const auto k = static_cast<Eigen::Index>(j);
    try {
      out.fits[j] = fit_constrained_quantile(sample.y, sample.x, tau_grid[k],
                                             design.x0, p, bandwidths[k],
                                             kernel, opts);
    } catch (...) {
      rethrow_with_point("tau", tau_grid[k]);
    }
    out.estimates[k] = slope_ratio(out.fits[j], design);
  });
  Eigen::VectorXd levels(g);
  for (Eigen::Index k = 0; k < g; ++k)
    levels[k] = out.fits[static_cast<std::size_t>(k)].level();
  out.y_tau = rearrange_monotone(tau_grid, levels);
  return out;
}

EffectCurve
ldte_at_quantiles(const DistributionalBuilder& builder,
                  const EffectCurve& quantile_curve)
{
  if (quantile_curve.kind != EffectKind::quantile ||
      quantile_curve.y_tau.size() != quantile_curve.grid.size())
    throw std::invalid_argument("a quantile curve with y_tau is required");
  EffectCurve out = builder(quantile_curve.y_tau);
  if (out.grid.size() != quantile_curve.y_tau.size())
    throw std::invalid_argument("builder returned a curve of the wrong size");
  out.levels = quantile_curve.grid;
  return out;
}

Eigen::VectorXd
integrate_from_zero(const Eigen::VectorXd& u, const Eigen::VectorXd& f,
                    const Eigen::VectorXd& tau)
{
  if (u.size() == 0 || u.size() != f.size())
    throw std::invalid_argument("integration grid and values differ in size");
  const Eigen::Index m = u.size();
  // running integral at each node
  Eigen::VectorXd cum(m);
  cum[0] = u[0] * f[0];
  for (Eigen::Index k = 1; k < m; ++k)
    cum[k] = cum[k - 1] + 0.5 * (u[k] - u[k - 1]) * (f[k] + f[k - 1]);

  Eigen::VectorXd out(tau.size());
  for (Eigen::Index j = 0; j < tau.size(); ++j) {
    const double t = tau[j];
    if (t < 0.0 || t > u[m - 1] + 1e-12)
      throw ConfigError("evaluation level lies outside the integration grid");
    if (t <= u[0]) {
      out[j] = t * f[0];
      continue;
    }
    const double* pos = std::upper_bound(u.data(), u.data() + m, t);
    Eigen::Index k = static_cast<Eigen::Index>(pos - u.data()) - 1;
    if (k >= m - 1) {
      out[j] = cum[m - 1];
      continue;
    }
    const double d = t - u[k];
    const double w = d / (u[k + 1] - u[k]);
    const double ft = f[k] + w * (f[k + 1] - f[k]);
    out[j] = cum[k] + 0.5 * d * (f[k] + ft);
  }
  return out;
}

LorenzComposition
compose_lorenz(const Eigen::VectorXd& integration_grid,
               const Eigen::VectorXd& quantile_effect, const Eigen::VectorXd& y_u,
               double mu0, double mean_effect, const Eigen::VectorXd& tau_grid)
{
  if (!(mu0 > 0.0)) {
    std::ostringstream msg;
    msg << "baseline mean at the kink is " << mu0
        << "; the Lorenz curve requires a positive mean";
    throw NonpositiveMeanError(msg.str());
  }
  LorenzComposition out;
  const Eigen::VectorXd iq =
    integrate_from_zero(integration_grid, quantile_effect, tau_grid);
  out.lorenz = integrate_from_zero(integration_grid, y_u, tau_grid) / mu0;
  out.effect = (iq - out.lorenz * mean_effect) / mu0;
  return out;
}

LorenzEstimate
rkd_lorenz(const Sample& sample, const KinkDesign& design,
           const Eigen::VectorXd& tau_grid,
           const Eigen::VectorXd& integration_grid, int p,
           const LorenzBandwidths& bandwidths, const KernelSpec& kernel,
           const QuantileSolverOptions& opts)
{
  validate_level_grid(tau_grid, "reporting grid");
  validate_level_grid(integration_grid, "integration grid");
  if (bandwidths.lorenz_h.size() != tau_grid.size())
    throw std::invalid_argument("one Lorenz bandwidth per level is required");

  LorenzEstimate out;
  out.integration_grid = integration_grid;
  out.mean_curve = rkd_mean(sample, design, p, bandwidths.mean_h, kernel);
  const double mu0 = out.mean_curve.mu0;
  if (!(mu0 > 0.0)) {
    std::ostringstream msg;
    msg << "baseline mean at the kink is " << mu0
        << "; the Lorenz curve requires a positive mean";
    throw NonpositiveMeanError(msg.str());
  }
  out.quantile_curve = rkd_quantile(sample, design, integration_grid, p,
                                    bandwidths.quantile_h, kernel, opts);

  const LorenzComposition comp = compose_lorenz(
    integration_grid, out.quantile_curve.estimates, out.quantile_curve.y_tau,
    mu0, out.mean_curve.estimates[0], tau_grid);

  EffectCurve& c = out.curve;
  c.kind = EffectKind::lorenz;
  c.grid = tau_grid;
  c.bandwidths = bandwidths.lorenz_h;
  c.estimates = comp.effect;
  c.lorenz = comp.lorenz;
  c.mu0 = mu0;
  return out;
}

} // namespace rkd
