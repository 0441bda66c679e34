#pragma once

#include "rkd/kernel.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rkd {

//! v_n = 2.576 min{sd(x), IQR(x)/1.349} n^{-1/5}. Requires n >= 10 and
//! nonzero dispersion.
double rule_of_thumb_vn(const Eigen::VectorXd& x);

//! (1/(n vn)) sum K((x_i - x0)/vn)
double kde_at(const Eigen::VectorXd& x, double x0, const KernelSpec& kernel,
              double vn);

struct ConditionalBandwidths
{
  double h1 = 0.0; // outcome direction
  double h2 = 0.0; // running-variable direction
  double c = 0.0;  // truncation constant actually used
};

//! Bashtannyk-Hyndman reference-rule bandwidths for the kernel conditional
//! density of y given x.
//!
//! `c` is the truncation constant (2 or 3 in practice); the exponential term
//! of v(c) is evaluated as exp(-c^2/2). `b` is the scale constant of the
//! reference model, default 1. Throws RkdError when v(c) <= 0.
ConditionalBandwidths bashtannyk_hyndman_bandwidths(const Eigen::VectorXd& y,
                                                    const Eigen::VectorXd& x,
                                                    const KernelSpec& kernel,
                                                    double c = 2.0,
                                                    double b = 1.0);

//! As above, but when v(c) <= 0 retries with c = 3 (the other customary
//! value) and appends a note to `notes`.
ConditionalBandwidths reference_rule_bandwidths(const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& x,
                                                const KernelSpec& kernel,
                                                double c, double b,
                                                std::vector<std::string>* notes);

//! Nadaraya-Watson conditional density estimate at (y0 | x0). Throws
//! EmptyWindowError when no observation has positive weight in x.
double conditional_density(double y0, double x0, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& x, const KernelSpec& kernel,
                           double h1, double h2);

struct DensityEstimates
{
  double fx_at_x0 = 0.0;
  Eigen::VectorXd y_grid;
  Eigen::VectorXd fyx;
  double vn = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  std::vector<std::string> notes;
};

//! f_X(x0) at the rule-of-thumb bandwidth plus f_{Y|X}(y|x0) on a grid.
//! Throws RkdError when f_X(x0) is not strictly positive.
DensityEstimates estimate_densities(const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& x, double x0,
                                    const KernelSpec& kernel,
                                    const Eigen::VectorXd& y_grid,
                                    double c = 2.0, double b = 1.0);

double sample_sd(const Eigen::VectorXd& v);
//! Linear-interpolation sample quantile (type 7).
double sample_quantile(const Eigen::VectorXd& v, double prob);

} // namespace rkd
