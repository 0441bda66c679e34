#pragma once

#include "rkd/kernel.hpp"
#include "rkd/quantile_solver.hpp"

#include <Eigen/Dense>
#include <limits>

namespace rkd {

//! Coefficients of a constrained local polynomial fit at the kink:
//! (level, d1+/1!, d1-/1!, ..., dp+/p!, dp-/p!) in running-variable units.
struct ConstrainedFit
{
  int p = 0;
  double x0 = 0.0;
  //! Bandwidth; +inf for unweighted global fits.
  double h = std::numeric_limits<double>::infinity();
  Eigen::VectorXd coeffs;
  int n_eff_left = 0;
  int n_eff_right = 0;
  double objective = 0.0;

  double level() const { return coeffs[0]; }
  double right_derivative(int nu) const;
  double left_derivative(int nu) const;
  //! r_p(x - x0)' coeffs
  double fitted(double x) const;
};

//! Kernel-weighted least squares on the constrained basis with weights
//! K((x - x0)/h). Throws IdentificationError when either side has fewer than
//! p+1 kernel-positive observations and IllConditionedError when the
//! weighted Gram matrix (after column equilibration) has condition number
//! above 1e12.
ConstrainedFit fit_constrained_wls(const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& x, double x0, int p,
                                   double h, const KernelSpec& kernel);

//! Unweighted least squares on the constrained basis over all observations.
ConstrainedFit fit_global_wls(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                              double x0, int p);

//! Kernel-weighted check-loss minimization on the constrained basis.
ConstrainedFit fit_constrained_quantile(const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& x, double tau,
                                        double x0, int p, double h,
                                        const KernelSpec& kernel,
                                        const QuantileSolverOptions& opts = {});

ConstrainedFit fit_global_quantile(const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& x, double tau,
                                   double x0, int p,
                                   const QuantileSolverOptions& opts = {});

//! One-dimensional monotone rearrangement: the values sorted ascending.
Eigen::VectorXd rearrange_monotone(const Eigen::VectorXd& taus,
                                   const Eigen::VectorXd& values);

//! (z - r_p(x - x0)' coeffs) 1{|x - x0| <= h}
Eigen::VectorXd residuals(const ConstrainedFit& fit, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& x);

//! Local linear fit of z on (1, x - x0) using only one side of the kink;
//! returns the intercept. Weights K((x - x0)/h) when h is finite.
double one_sided_local_linear(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                              double x0, bool right, double h,
                              const KernelSpec& kernel);

} // namespace rkd
