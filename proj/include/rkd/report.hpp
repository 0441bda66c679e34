#pragma once

#include "rkd/bandwidth.hpp"
#include "rkd/config.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/simulation.hpp"

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace rkd {

//! Identifier written to the "schema" field of every report.
inline constexpr const char* report_schema = "rkd-report/1";
inline constexpr const char* library_version = "0.1.0";

//! Report of the estimate, test, and band commands. The numerical payload
//! lives under "results"; "config" holds the full run configuration.
nlohmann::json analysis_report(const std::string& command,
                               const RunConfig& cfg, const IngestResult& data,
                               const AnalysisResult& result);

nlohmann::json bandwidth_report(const RunConfig& cfg, const IngestResult& data,
                                const std::vector<BandwidthSchedule>& schedules);

//! Runtime and worker count sit under "runtime", outside "results".
nlohmann::json study_report(const RunConfig& cfg, const StudyReport& report);

//! One row per grid point of every effect, columns
//! effect,index,grid,level,estimate,se,band_lo,band_hi,bandwidth.
void write_curve_csv(std::ostream& out, const AnalysisResult& result);

//! One row per grid point of every schedule, columns
//! effect,index,grid,pilot,main,lower_clamp,upper_clamp.
void write_bandwidth_csv(std::ostream& out, const RunConfig& cfg,
                         const std::vector<BandwidthSchedule>& schedules);

//! One row per effect, sample size, and grid point, columns
//! effect,n,index,grid,truth,mean_estimate,bias,bias_ratio,absolute_bias,rmse,
//! mean_bandwidth,uniform_coverage,completed,failures.
void write_study_csv(std::ostream& out, const StudyReport& report);

} // namespace rkd
