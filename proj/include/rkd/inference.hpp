#pragma once

#include "rkd/estimands.hpp"
#include "rkd/kernel.hpp"
#include "rkd/sample.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rkd {

enum class EnsembleKind
{
  multiplier,
  pivotal,
  lorenz_composite
};

std::string to_string(EnsembleKind kind);

//! B simulated draws of the limiting process of sqrt(n h^3) (estimate - truth)
//! over a grid. Row b is one complete process draw.
struct BootstrapEnsemble
{
  EnsembleKind kind = EnsembleKind::multiplier;
  Eigen::VectorXd grid;
  //! Normalizing bandwidth of each grid point.
  Eigen::VectorXd bandwidths;
  std::int64_t n = 0;
  Eigen::MatrixXd draws; // B x grid
  std::uint64_t master_seed = 0;
  std::vector<std::string> warnings;

  Eigen::Index replications() const { return draws.rows(); }
};

//! How the influence weights normalize the local design.
enum class InfluenceScaling
{
  //! J = (1/(n h)) sum_i K(u_i) r(u_i) r(u_i)', the sample analog of the
  //! limit f_X(x0) G; exact for the linearized weighted least squares fit at
  //! any bandwidth.
  sample_gram,
  //! The limit f_X(x0) G with the kernel constant G and the estimate of
  //! f_X(x0).
  asymptotic
};

std::string to_string(InfluenceScaling scaling);
InfluenceScaling influence_scaling_from_name(const std::string& name);

//! Influence weights of one grid point of a constrained fit:
//! w_i = s' J^{-1} r(u_i) K(u_i) / (gap sqrt(n h)), u_i = (x_i - x0)/h,
//! s = e_1 - e_2 (right minus left slope slot), J as selected by `scaling`.
//! Zero outside the window.
Eigen::VectorXd influence_weights(const Eigen::VectorXd& x, double x0, int p,
                                  double h, const KernelSpec& kernel,
                                  double gap, double fx,
                                  InfluenceScaling scaling =
                                    InfluenceScaling::sample_gram);

//! Multiplier process draws
//! G_b(theta) = sum_i xi_bi w_i(theta) e_i(theta), xi_bi ~ N(0, 1),
//! with one residual vector per grid point. The same xi vector serves every
//! grid point of a row. Throws std::invalid_argument when fx <= 0 or B < 2.
BootstrapEnsemble multiplier_draws(const Eigen::VectorXd& x,
                                   const KinkDesign& design,
                                   const Eigen::VectorXd& grid,
                                   const std::vector<Eigen::VectorXd>& residuals,
                                   const Eigen::VectorXd& bandwidths, double fx,
                                   int p, const KernelSpec& kernel, int B,
                                   std::uint64_t seed,
                                   InfluenceScaling scaling =
                                     InfluenceScaling::sample_gram);

//! Multiplier draws for a mean or distributional curve, taking residuals from
//! the curve's fits (outcome y or the indicator 1{y <= grid point}).
BootstrapEnsemble multiplier_draws(const Sample& sample,
                                   const KinkDesign& design,
                                   const EffectCurve& curve, double fx, int p,
                                   const KernelSpec& kernel, int B,
                                   std::uint64_t seed,
                                   InfluenceScaling scaling =
                                     InfluenceScaling::sample_gram);

//! Pivotal draws of the quantile process
//! G_b(tau) = sum_i w_i(tau) (tau - 1{U_bi <= tau}) / f_{Y|X}(y_tau | x0),
//! U_bi uniform and shared by every tau of a row. Throws PivotalDensityError
//! for a nonpositive density.
BootstrapEnsemble pivotal_draws(const Eigen::VectorXd& x,
                                const KinkDesign& design,
                                const Eigen::VectorXd& tau_grid,
                                const Eigen::VectorXd& bandwidths, double fx,
                                const Eigen::VectorXd& fyx_at_quantiles, int p,
                                const KernelSpec& kernel, int B,
                                std::uint64_t seed,
                                InfluenceScaling scaling =
                                  InfluenceScaling::sample_gram);

//! Row-wise Lorenz composition
//! G_L(tau) = (1/mu0) (int_0^tau c_u(tau) G_Q(u) du - L(tau) c_mu(tau) G_mu),
//! where c_u(tau) = (h_L(tau)/h_u)^{3/2} and c_mu(tau) = (h_L(tau)/h_mu)^{3/2}
//! carry each piece to the Lorenz normalization. With `rescale` false both
//! factors are one. `pivotal` lives on the integration grid, `multiplier` on
//! the single mean point.
BootstrapEnsemble lorenz_composite_draws(const BootstrapEnsemble& multiplier,
                                         const BootstrapEnsemble& pivotal,
                                         double mu0,
                                         const Eigen::VectorXd& lorenz_baseline,
                                         const Eigen::VectorXd& tau_grid,
                                         const Eigen::VectorXd& lorenz_bandwidths,
                                         bool rescale = true);

enum class TestKind
{
  significance,
  homogeneity
};

std::string to_string(TestKind kind);

struct TestResult
{
  TestKind kind = TestKind::significance;
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  double level = 0.05;
  bool reject = false;
};

//! Empirical (1 - level) quantile taking the order statistic at index
//! ceil((1 - level) B), 1-based.
double upper_quantile_higher(std::vector<double> values, double level);

//! sup |sqrt(n h^3) estimate| against the row-wise sup |G_b|.
TestResult significance_test(const EffectCurve& curve,
                             const BootstrapEnsemble& ens, double level);

//! sup |sqrt(n h^3) (estimate - average estimate)| with averages taken by the
//! trapezoid rule over the grid (levels when present); draws are centered
//! the same way after mapping them back to the estimate scale.
TestResult homogeneity_test(const EffectCurve& curve,
                            const BootstrapEnsemble& ens, double level);

//! Copies `curve` with band_lo/band_hi = estimate -+ c / sqrt(n h^3).
EffectCurve uniform_band(const EffectCurve& curve, const BootstrapEnsemble& ens,
                         double level);

//! Standard deviation of each ensemble column divided by sqrt(n h^3).
Eigen::VectorXd pointwise_se(const BootstrapEnsemble& ens);

} // namespace rkd
