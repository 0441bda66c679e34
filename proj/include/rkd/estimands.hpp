#pragma once

#include "rkd/kernel.hpp"
#include "rkd/local_fit.hpp"
#include "rkd/sample.hpp"

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace rkd {

//! Kink location and one-sided slopes of the deterministic treatment rule.
struct KinkDesign
{
  double x0 = 0.0;
  double slope_right = 1.0;
  double slope_left = -1.0;

  double gap() const { return slope_right - slope_left; }
  //! Throws ConfigError when |gap| <= 1e-12.
  void validate() const;
};

enum class EffectKind
{
  mean,
  distributional,
  quantile,
  lorenz
};

std::string to_string(EffectKind kind);
EffectKind effect_from_name(const std::string& name);

struct EffectCurve
{
  EffectKind kind = EffectKind::mean;
  //! Evaluation points: theta for Type 1 effects, tau for quantile and Lorenz.
  Eigen::VectorXd grid;
  //! Quantile levels indexing the grid when it consists of estimated
  //! quantiles (distributional effect at y_tau); empty otherwise.
  Eigen::VectorXd levels;
  Eigen::VectorXd estimates;
  Eigen::VectorXd bandwidths;

  double mu0 = std::numeric_limits<double>::quiet_NaN();
  //! Rearranged conditional quantiles at x0 (quantile kind).
  Eigen::VectorXd y_tau;
  //! Conditional Lorenz curve at x0 (Lorenz kind).
  Eigen::VectorXd lorenz;

  Eigen::VectorXd se;
  Eigen::VectorXd band_lo;
  Eigen::VectorXd band_hi;

  //! Per-point constrained fits backing the estimates.
  std::vector<ConstrainedFit> fits;

  Eigen::Index size() const { return grid.size(); }
  //! Points used for grid averaging: `levels` when present, else `grid`.
  const Eigen::VectorXd& averaging_axis() const
  {
    return levels.size() > 0 ? levels : grid;
  }
};

EffectCurve rkd_mean(const Sample& sample, const KinkDesign& design, int p,
                     double h, const KernelSpec& kernel);

EffectCurve rkd_distributional(const Sample& sample, const KinkDesign& design,
                               const Eigen::VectorXd& y_grid, int p,
                               const Eigen::VectorXd& bandwidths,
                               const KernelSpec& kernel);

EffectCurve rkd_quantile(const Sample& sample, const KinkDesign& design,
                         const Eigen::VectorXd& tau_grid, int p,
                         const Eigen::VectorXd& bandwidths,
                         const KernelSpec& kernel,
                         const QuantileSolverOptions& opts = {});

using DistributionalBuilder =
  std::function<EffectCurve(const Eigen::VectorXd& y_points)>;

//! Distributional effect evaluated at the estimated quantiles y_tau of
//! `quantile_curve`; the result is indexed by the quantile levels.
EffectCurve ldte_at_quantiles(const DistributionalBuilder& builder,
                              const EffectCurve& quantile_curve);

//! Bandwidths entering the Lorenz estimator: pointwise quantile bandwidths on
//! the integration grid, the mean-effect bandwidth, and the per-tau
//! normalizing bandwidths reported with the curve.
struct LorenzBandwidths
{
  Eigen::VectorXd quantile_h;
  double mean_h = 0.0;
  Eigen::VectorXd lorenz_h;
};

struct LorenzEstimate
{
  EffectCurve curve;
  EffectCurve quantile_curve; // over the integration grid
  EffectCurve mean_curve;
  Eigen::VectorXd integration_grid;
};

LorenzEstimate rkd_lorenz(const Sample& sample, const KinkDesign& design,
                          const Eigen::VectorXd& tau_grid,
                          const Eigen::VectorXd& integration_grid, int p,
                          const LorenzBandwidths& bandwidths,
                          const KernelSpec& kernel,
                          const QuantileSolverOptions& opts = {});

//! Composes the Lorenz effect from its ingredients:
//! (1/mu0) (int_0^tau dq(u) du - L(tau) d_mu), L(tau) = int_0^tau y_u du / mu0.
struct LorenzComposition
{
  Eigen::VectorXd effect;
  Eigen::VectorXd lorenz;
};
LorenzComposition compose_lorenz(const Eigen::VectorXd& integration_grid,
                                 const Eigen::VectorXd& quantile_effect,
                                 const Eigen::VectorXd& y_u, double mu0,
                                 double mean_effect,
                                 const Eigen::VectorXd& tau_grid);

//! int_0^tau f(u) du for each tau, from samples of f on an increasing grid in
//! (0, 1): the leading piece [0, u_1] is a rectangle of height f(u_1); the
//! rest is trapezoidal, with linear interpolation inside the last panel.
Eigen::VectorXd integrate_from_zero(const Eigen::VectorXd& u_grid,
                                    const Eigen::VectorXd& values,
                                    const Eigen::VectorXd& tau);

//! {0.01, 0.02, ..., 0.99}
Eigen::VectorXd default_integration_grid();
//! {0.1, 0.2, ..., 0.9}
Eigen::VectorXd default_reporting_grid();

//! Checks a quantile-level grid: strictly increasing and inside (0, 1).
void validate_level_grid(const Eigen::VectorXd& grid, const char* what);

} // namespace rkd
