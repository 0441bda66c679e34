#pragma once

#include <Eigen/Dense>

namespace rkd {

struct QuantileSolverOptions
{
  int max_iter = 10000;
  //! Duality-gap target relative to 1 + |objective|.
  double gap_tol = 1e-12;
  //! Tolerance on the KKT multiplier bounds at the polished vertex.
  double kkt_tol = 1e-9;
};

struct QuantileSolution
{
  Eigen::VectorXd beta;
  double objective = 0.0;
  int iterations = 0;
  //! True when the returned point is an exact basic solution certified by
  //! the finite KKT check.
  bool vertex = false;
};

//! sum_i w_i rho_tau(y_i - X_i' beta) with rho_tau(u) = (tau - 1{u < 0}) u.
double weighted_check_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w, double tau,
                           const Eigen::VectorXd& beta);

//! Minimizes the weighted check loss. All weights must be positive.
//!
//! A primal-dual interior point method (Mehrotra predictor-corrector on the
//! bounded dual LP) drives the duality gap down; the iterate is then polished
//! to the basic solution interpolating the observations with the smallest
//! residuals and certified by a finite KKT check. Ties between equally
//! small residuals are broken by observation index. Throws ConvergenceError
//! when neither the gap target nor the KKT certificate is reached.
QuantileSolution solve_weighted_quantile(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w, double tau,
                                         const QuantileSolverOptions& opts = {});

} // namespace rkd
