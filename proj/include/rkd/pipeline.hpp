#pragma once

#include "rkd/bandwidth.hpp"
#include "rkd/density.hpp"
#include "rkd/estimands.hpp"
#include "rkd/inference.hpp"
#include "rkd/kernel.hpp"
#include "rkd/sample.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rkd {

//! Everything needed to estimate and (optionally) simulate the limiting
//! processes of a set of effects on one sample.
struct AnalysisOptions
{
  KinkDesign design{};
  std::vector<EffectKind> effects{ EffectKind::mean };
  Eigen::VectorXd tau_grid = default_reporting_grid();
  Eigen::VectorXd integration_grid = default_integration_grid();
  //! Outcome values for the distributional effect; empty means the estimated
  //! conditional quantiles at tau_grid.
  Eigen::VectorXd y_grid;
  int p = 2;
  int q = 3;
  KernelSpec kernel{};
  //! Simulated process draws per effect; 0 skips inference.
  int boot = 2500;
  double level = 0.05;
  std::uint64_t seed = 1;
  //! One bandwidth for every fit instead of the plug-in selectors.
  std::optional<double> fixed_bandwidth;
  QuantileSelectorOptions quantile_selector{};
  InfluenceScaling influence_scaling = InfluenceScaling::sample_gram;
  //! Rescale the Lorenz bootstrap pieces to the Lorenz bandwidths.
  bool lorenz_rescale = true;
  bool bands = true;
  bool tests = false;
  //! Record per-effect failures instead of throwing.
  bool capture_errors = false;

  //! Throws ConfigError on invalid settings.
  void validate() const;
};

struct EffectResult
{
  EffectKind kind = EffectKind::mean;
  EffectCurve curve;
  //! Bandwidth schedule behind the curve (plug-in mode only). For the Lorenz
  //! effect this is the per-tau normalizing schedule.
  std::optional<BandwidthSchedule> schedule;
  std::optional<TestResult> significance;
  std::optional<TestResult> homogeneity;
  EnsembleKind ensemble_kind = EnsembleKind::multiplier;
  std::vector<std::string> warnings;
  //! Empty on success; the failure message when errors are captured.
  std::string error;

  bool ok() const { return error.empty(); }
};

struct AnalysisResult
{
  std::int64_t n = 0;
  double fx = 0.0;
  std::optional<ConditionalBandwidths> density_bandwidths;
  std::vector<EffectResult> effects;
  std::vector<std::string> warnings;
};

//! Plug-in (or fixed) bandwidths, estimates, and, when boot > 0, simulated
//! process draws feeding standard errors, uniform bands, and tests.
AnalysisResult analyze(const Sample& sample, const AnalysisOptions& options);

//! Bandwidth schedules alone, one per requested effect.
std::vector<BandwidthSchedule> select_bandwidths(const Sample& sample,
                                                 const AnalysisOptions& options);

} // namespace rkd
