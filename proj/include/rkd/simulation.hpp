#pragma once

#include "rkd/estimands.hpp"
#include "rkd/inference.hpp"
#include "rkd/kernel.hpp"
#include "rkd/sample.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rkd {

//! Y = 1 + 0.5 B + X + 0.1 X^2 + 1.5 B X + (1 + 2B) e,  B = |X|,
//! (X, e) jointly normal with standard deviations (sigma_x, sigma_eps) and
//! correlation rho.
struct DgpConfig
{
  double sigma_x = 0.1781742;
  double sigma_eps = 0.1295;
  double rho = 0.25;
  std::int64_t n = 2000;
  std::uint64_t seed = 1;

  void validate() const;
  //! Standard deviation of e given X = 0.
  double sigma_tilde() const;
};

Sample generate_dgp(const DgpConfig& cfg);

//! Kink at 0 with slopes +1 (right) and -1 (left).
KinkDesign dgp_design();

//! Analytic effects of the simulation design. The grid holds quantile levels
//! for every kind except `mean` (ignored); the distributional effect is
//! evaluated at the true conditional quantiles 1 + sigma_tilde z_tau.
Eigen::VectorXd true_effects(EffectKind kind, const Eigen::VectorXd& grid,
                             const DgpConfig& cfg = {});

//! Delta_Id(y) at arbitrary outcome values.
Eigen::VectorXd true_distributional_at(const Eigen::VectorXd& y,
                                       const DgpConfig& cfg = {});

//! Conditional quantiles of Y given X = 0.
Eigen::VectorXd true_conditional_quantiles(const Eigen::VectorXd& tau,
                                           const DgpConfig& cfg = {});

//! Density of Y given X = 0.
double true_conditional_density(double y, const DgpConfig& cfg = {});

enum class BandwidthMode
{
  plugin, //!< plug-in selectors per effect
  fixed   //!< one user-supplied bandwidth for every fit
};

struct StudyConfig
{
  std::vector<EffectKind> effects{ EffectKind::mean };
  std::vector<std::int64_t> n_list{ 2000 };
  int reps = 500;
  int boot = 500;
  std::uint64_t seed = 20240601;
  double level = 0.05;
  int p = 2;
  int q = 3;
  KernelSpec kernel{};
  BandwidthMode bandwidth_mode = BandwidthMode::plugin;
  double fixed_bandwidth = 0.0;
  Eigen::VectorXd tau_grid = default_reporting_grid();
  Eigen::VectorXd integration_grid = default_integration_grid();
  double bh_constant = 2.0;
  double bh_b = 1.0;
  InfluenceScaling influence_scaling = InfluenceScaling::sample_gram;
  DgpConfig dgp{};
  int workers = 0;

  void validate() const;
};

struct EffectSummary
{
  EffectKind kind = EffectKind::mean;
  std::int64_t n = 0;
  Eigen::VectorXd grid;
  Eigen::VectorXd truth;
  Eigen::VectorXd mean_estimate;
  Eigen::VectorXd bias;
  //! |mean bias| / |truth|, or |mean bias| where the truth vanishes.
  Eigen::VectorXd bias_ratio;
  std::vector<bool> absolute_bias;
  Eigen::VectorXd rmse;
  Eigen::VectorXd mean_bandwidth;
  //! Share of replications whose band covers the truth at every grid point;
  //! NaN without bootstrap draws.
  double uniform_coverage = 0.0;
  int completed = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
};

struct StudyReport
{
  StudyConfig config;
  std::vector<EffectSummary> summaries;
  double runtime_seconds = 0.0;
  int workers_used = 1;

  const EffectSummary& find(EffectKind kind, std::int64_t n) const;
};

//! One replication's estimates for every requested effect.
struct ReplicationResult
{
  std::vector<EffectCurve> curves; // aligned with StudyConfig::effects
  std::vector<std::string> errors; // empty string when the effect succeeded
};

ReplicationResult run_replication(const StudyConfig& cfg, std::int64_t n,
                                  int rep);

StudyReport run_study(const StudyConfig& cfg);

} // namespace rkd
