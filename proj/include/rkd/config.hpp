#pragma once

#include "rkd/estimands.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/sample.hpp"
#include "rkd/simulation.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace rkd {

//! Header names of the outcome, running variable, and optional treatment.
struct ColumnMapping
{
  std::string y = "y";
  std::string x = "x";
  std::optional<std::string> b;
};

//! Kink of the rule b = min(a x, cap): x0 = cap / a, slope a on the side where
//! a x < cap and 0 on the other. Accepts "min(0.04x, 205)", "min(0.04*x,205)"
//! and the argument order "min(205, 0.04x)". Throws ConfigError otherwise.
KinkDesign parse_kink_rule(const std::string& rule);

//! Monte Carlo settings used by the simulate command; effects, grids, orders,
//! kernel, draws, and level come from the enclosing RunConfig.
struct SimulationSection
{
  std::vector<std::int64_t> n_list{ 2000 };
  int reps = 500;
  BandwidthMode bandwidth_mode = BandwidthMode::plugin;
  DgpConfig dgp{};
  int workers = 0;
};

struct RunConfig
{
  std::string input;
  ColumnMapping columns{};
  //! Exactly one of `design` (explicit kink) and `rule` must be set for data
  //! commands.
  std::optional<KinkDesign> design;
  std::optional<std::string> rule;
  std::vector<EffectKind> effects{ EffectKind::mean };
  Eigen::VectorXd tau_grid = default_reporting_grid();
  Eigen::VectorXd integration_grid = default_integration_grid();
  //! Distributional outcome points; empty means estimated quantiles at tau.
  Eigen::VectorXd y_grid;
  int p = 2;
  int q = 3;
  std::string kernel = "tricube";
  int boot = 2500;
  double level = 0.05;
  std::uint64_t seed = 1;
  std::optional<double> bandwidth;
  double bh_constant = 2.0;
  double bh_b = 1.0;
  InfluenceScaling influence_scaling = InfluenceScaling::sample_gram;
  bool lorenz_rescale = true;
  SimulationSection simulation{};

  //! The kink implied by `design` or `rule`. Throws ConfigError when both or
  //! neither are given or the gap vanishes.
  KinkDesign kink() const;

  //! Checks everything the data commands need (kink included).
  void validate() const;
  //! Checks everything the simulate command needs (no input or kink).
  void validate_simulation() const;

  AnalysisOptions analysis_options() const;
  StudyConfig study_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);

//! Reads a config document. Unknown keys are rejected so typos surface.
RunConfig run_config_from_json(const nlohmann::json& doc);

//! Loads a config file; a report file is accepted too, in which case its
//! embedded config is used.
RunConfig load_run_config(const std::string& path);

struct IngestResult
{
  Sample sample;
  //! One entry per rejected line, with its 1-based line number.
  std::vector<std::string> warnings;
  std::int64_t rows_read = 0;
};

//! Reads comma-delimited text with a header row. Rows with a missing,
//! unparsable, or non-finite cell in a mapped column are skipped with a
//! warning. Throws ConfigError for an unreadable file, missing columns, or no
//! usable rows.
IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping);

} // namespace rkd
