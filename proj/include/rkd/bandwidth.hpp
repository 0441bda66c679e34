#pragma once

#include "rkd/estimands.hpp"
#include "rkd/kernel.hpp"
#include "rkd/quantile_solver.hpp"
#include "rkd/sample.hpp"

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

namespace rkd {

//! Bias and variance constants of the AMSE of a derivative-gap estimate.
struct AmseConstants
{
  double bias = 0.0;
  double variance = 0.0;
};

//! B = (e_{2nu} - e_{2nu+1})' G^{-1} [d+ t+ + d- t-] / (p+1)!,
//! V = (e_{2nu} - e_{2nu+1})' G^{-1} [s+ P+ + s- P-] G^{-1} (...) / f_X,
//! where d+- are the (p+1)-th one-sided derivatives, t+- the moment vectors
//! of order p+1, and s+- the one-sided error variances.
AmseConstants amse_bias_variance(double deriv_plus, double deriv_minus,
                                 const KernelConstants& constants,
                                 double sigma2_plus, double sigma2_minus,
                                 double fx, int nu);

//! {c V / B^2}^{1/(2p+3)} n^{-1/(2p+3)} with c = (1+2nu) / (2(p+1-nu)).
double amse_optimal_bandwidth(const AmseConstants& c, std::int64_t n, int nu,
                              int p);

//! Quantities entering one stage (pilot or main) of a plug-in selector.
struct StageComponents
{
  double bias = 0.0;
  double variance = 0.0;
  //! Highest-order one-sided slots of the stage fit divided by k!, k the
  //! fit order (the fit coefficient already carries one 1/k!).
  double deriv_plus = 0.0;
  double deriv_minus = 0.0;
  double sigma2_plus = std::numeric_limits<double>::quiet_NaN();
  double sigma2_minus = std::numeric_limits<double>::quiet_NaN();
  //! Fitted level at the kink (conditional mean or quantile).
  double level = std::numeric_limits<double>::quiet_NaN();
  //! Conditional density at `level` (quantile selectors only).
  double fyx = std::numeric_limits<double>::quiet_NaN();
  //! Bandwidth produced by this stage, before and after clamping.
  double raw_bandwidth = 0.0;
  double bandwidth = 0.0;
};

struct PointComponents
{
  StageComponents pilot;
  StageComponents main;
  double fx = 0.0;
  std::vector<std::string> warnings;
};

struct BandwidthSchedule
{
  Eigen::VectorXd grid;
  Eigen::VectorXd pilot;
  Eigen::VectorXd main;
  std::vector<PointComponents> components;
  std::int64_t n = 0;
  int p = 2;
  int q = 3;
  double lower_clamp = 0.0;
  double upper_clamp = 0.0;
  //! Conditional-density bandwidths (quantile selectors only).
  double density_h1 = std::numeric_limits<double>::quiet_NaN();
  double density_h2 = std::numeric_limits<double>::quiet_NaN();
  double density_c = std::numeric_limits<double>::quiet_NaN();
  //! Schedule-level notes, e.g. a fallback of the density reference rule.
  std::vector<std::string> notes;

  //! Notes followed by all per-point warnings.
  std::vector<std::string> all_warnings() const;
};

struct BandwidthClamp
{
  double lower = 0.0;
  double upper = 0.0;
};

//! [5 x median spacing of the observations nearest x0, range(x)], raised
//! where necessary so the interval keeps `min_side` observations strictly
//! inside the window on each side of x0.
BandwidthClamp bandwidth_clamp(const Eigen::VectorXd& x, double x0,
                               int min_side);

enum class OutcomeTransform
{
  identity,  //!< phi(y, theta) = y
  indicator  //!< phi(y, theta) = 1{y <= theta}
};

//! Two-step plug-in selector for Type 1 effects: pilot bandwidths from global
//! fits of order q+1, main bandwidths from local fits of order p+1 at the
//! pilot. `theta_grid` is ignored for the identity transform (one point).
BandwidthSchedule algorithm1_bandwidths(const Sample& sample, double x0,
                                        const Eigen::VectorXd& theta_grid,
                                        OutcomeTransform phi, int p, int q,
                                        const KernelSpec& kernel);

struct QuantileSelectorOptions
{
  //! Truncation constant of the conditional-density reference rule.
  double bh_constant = 2.0;
  double bh_b = 1.0;
  //! Power of f_{Y|X} in the quantile variance constant. The selector formula
  //! uses 1; the limiting covariance of the quantile process has 2.
  int density_power = 1;
  QuantileSolverOptions solver{};
};

//! Pointwise plug-in bandwidths for the quantile effect.
BandwidthSchedule qrkd_bandwidths(const Sample& sample, double x0,
                                  const Eigen::VectorXd& tau_grid, int p, int q,
                                  const KernelSpec& kernel,
                                  const QuantileSelectorOptions& opts = {});

struct LorenzBandwidthSchedule
{
  //! Per-tau normalizing bandwidths on the reporting grid; pilot holds NaN.
  BandwidthSchedule lorenz;
  //! Per-u quantile bandwidths on the integration grid.
  BandwidthSchedule quantile;
  //! Mean-effect schedule (single point).
  BandwidthSchedule mean;
  double mu0 = 0.0;
  Eigen::VectorXd lorenz_curve;
  Eigen::VectorXd bias_l;
  Eigen::VectorXd variance_l;

  LorenzBandwidths bandwidths() const;
};

LorenzBandwidthSchedule algorithm2_lorenz_bandwidths(
  const Sample& sample, double x0, const Eigen::VectorXd& tau_grid,
  const Eigen::VectorXd& integration_grid, int p, int q,
  const KernelSpec& kernel, const QuantileSelectorOptions& opts = {});

//! Composes the Lorenz bias/variance constants from quantile pieces on the
//! integration grid and the mean-effect pieces.
void compose_lorenz_amse(const Eigen::VectorXd& integration_grid,
                         const Eigen::VectorXd& bias_q,
                         const Eigen::VectorXd& variance_q,
                         const Eigen::VectorXd& y_u, double mu0,
                         const AmseConstants& mean_pieces,
                         const Eigen::VectorXd& tau_grid,
                         Eigen::VectorXd& lorenz, Eigen::VectorXd& bias_l,
                         Eigen::VectorXd& variance_l);

} // namespace rkd
