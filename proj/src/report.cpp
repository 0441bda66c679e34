#include "rkd/report.hpp"

#include <charconv>
#include <cmath>

namespace rkd {

namespace {

using nlohmann::json;

json
number(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json
vector_json(const Eigen::VectorXd& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(number(v[i]));
  return a;
}

json
strings(const std::vector<std::string>& v)
{
  json a = json::array();
  for (const auto& s : v)
    a.push_back(s);
  return a;
}

// Shortest round-trip text; empty for NaN or a missing entry.
std::string
cell(const Eigen::VectorXd& v, Eigen::Index i)
{
  if (i >= v.size() || !std::isfinite(v[i]))
    return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v[i]);
  return std::string(buf, res.ptr);
}

std::string
cell(double v)
{
  Eigen::VectorXd one(1);
  one[0] = v;
  return cell(one, 0);
}

json
stage_json(const StageComponents& s)
{
  return { { "bias", number(s.bias) },
           { "variance", number(s.variance) },
           { "deriv_plus", number(s.deriv_plus) },
           { "deriv_minus", number(s.deriv_minus) },
           { "sigma2_plus", number(s.sigma2_plus) },
           { "sigma2_minus", number(s.sigma2_minus) },
           { "level", number(s.level) },
           { "fyx", number(s.fyx) },
           { "raw_bandwidth", number(s.raw_bandwidth) },
           { "bandwidth", number(s.bandwidth) } };
}

json
schedule_json(const BandwidthSchedule& s)
{
  json comps = json::array();
  for (const auto& c : s.components) {
    comps.push_back({ { "pilot", stage_json(c.pilot) },
                      { "main", stage_json(c.main) },
                      { "fx", number(c.fx) },
                      { "warnings", strings(c.warnings) } });
  }
  return { { "grid", vector_json(s.grid) },
           { "pilot", vector_json(s.pilot) },
           { "main", vector_json(s.main) },
           { "n", s.n },
           { "p", s.p },
           { "q", s.q },
           { "lower_clamp", number(s.lower_clamp) },
           { "upper_clamp", number(s.upper_clamp) },
           { "density_h1", number(s.density_h1) },
           { "density_h2", number(s.density_h2) },
           { "density_c", number(s.density_c) },
           { "notes", strings(s.notes) },
           { "components", comps } };
}

json
test_json(const TestResult& t)
{
  return { { "kind", to_string(t.kind) },
           { "statistic", number(t.statistic) },
           { "critical_value", number(t.critical_value) },
           { "p_value", number(t.p_value) },
           { "level", t.level },
           { "reject", t.reject } };
}

json
curve_json(const EffectCurve& c)
{
  json j = { { "grid", vector_json(c.grid) },
             { "estimates", vector_json(c.estimates) },
             { "bandwidths", vector_json(c.bandwidths) },
             { "se", vector_json(c.se) },
             { "band_lo", vector_json(c.band_lo) },
             { "band_hi", vector_json(c.band_hi) } };
  if (c.levels.size() > 0)
    j["levels"] = vector_json(c.levels);
  if (c.y_tau.size() > 0)
    j["conditional_quantiles"] = vector_json(c.y_tau);
  if (c.lorenz.size() > 0)
    j["conditional_lorenz"] = vector_json(c.lorenz);
  if (std::isfinite(c.mu0))
    j["conditional_mean"] = c.mu0;
  return j;
}

json
header(const std::string& command, const RunConfig& cfg)
{
  return { { "schema", report_schema },
           { "version", library_version },
           { "command", command },
           { "config", to_json(cfg) },
           { "seed", cfg.seed } };
}

json
data_json(const IngestResult& data)
{
  return { { "rows_read", data.rows_read },
           { "n", data.sample.size() },
           { "warnings", strings(data.warnings) } };
}

} // namespace

nlohmann::json
analysis_report(const std::string& command, const RunConfig& cfg,
                const IngestResult& data, const AnalysisResult& result)
{
  json j = header(command, cfg);
  j["data"] = data_json(data);
  const KinkDesign d = cfg.kink();
  json effects = json::array();
  for (const auto& e : result.effects) {
    json r = { { "effect", to_string(e.kind) },
               { "ok", e.ok() },
               { "warnings", strings(e.warnings) } };
    if (!e.ok()) {
      r["error"] = e.error;
      effects.push_back(r);
      continue;
    }
    r["curve"] = curve_json(e.curve);
    if (cfg.boot > 0)
      r["ensemble"] = to_string(e.ensemble_kind);
    if (e.schedule)
      r["bandwidth_schedule"] = schedule_json(*e.schedule);
    if (e.significance)
      r["significance"] = test_json(*e.significance);
    if (e.homogeneity)
      r["homogeneity"] = test_json(*e.homogeneity);
    effects.push_back(r);
  }
  json res = { { "n", result.n },
               { "kink",
                 { { "x0", d.x0 },
                   { "slope_left", d.slope_left },
                   { "slope_right", d.slope_right },
                   { "gap", d.gap() } } },
               { "effects", effects },
               { "warnings", strings(result.warnings) } };
  if (cfg.boot > 0)
    res["fx"] = number(result.fx);
  if (result.density_bandwidths) {
    const auto& h = *result.density_bandwidths;
    res["density_bandwidths"] = { { "h1", number(h.h1) },
                                  { "h2", number(h.h2) },
                                  { "c", number(h.c) } };
  }
  j["results"] = res;
  return j;
}

nlohmann::json
bandwidth_report(const RunConfig& cfg, const IngestResult& data,
                 const std::vector<BandwidthSchedule>& schedules)
{
  json j = header("bandwidth", cfg);
  j["data"] = data_json(data);
  json list = json::array();
  for (std::size_t e = 0; e < schedules.size(); ++e) {
    json s = schedule_json(schedules[e]);
    s["effect"] = to_string(cfg.effects[e]);
    list.push_back(s);
  }
  j["results"] = { { "schedules", list } };
  return j;
}

nlohmann::json
study_report(const RunConfig& cfg, const StudyReport& report)
{
  json j = header("simulate", cfg);
  json rows = json::array();
  for (const auto& s : report.summaries) {
    json ab = json::array();
    for (const bool b : s.absolute_bias)
      ab.push_back(b);
    rows.push_back({ { "effect", to_string(s.kind) },
                     { "n", s.n },
                     { "grid", vector_json(s.grid) },
                     { "truth", vector_json(s.truth) },
                     { "mean_estimate", vector_json(s.mean_estimate) },
                     { "bias", vector_json(s.bias) },
                     { "bias_ratio", vector_json(s.bias_ratio) },
                     { "absolute_bias", ab },
                     { "rmse", vector_json(s.rmse) },
                     { "mean_bandwidth", vector_json(s.mean_bandwidth) },
                     { "uniform_coverage", number(s.uniform_coverage) },
                     { "completed", s.completed },
                     { "failures", s.failures },
                     { "failure_messages", strings(s.failure_messages) } });
  }
  j["results"] = { { "reps", report.config.reps }, { "summaries", rows } };
  j["runtime"] = { { "seconds", report.runtime_seconds },
                   { "workers", report.workers_used } };
  return j;
}

void
write_curve_csv(std::ostream& out, const AnalysisResult& result)
{
  out << "effect,index,grid,level,estimate,se,band_lo,band_hi,bandwidth\n";
  for (const auto& e : result.effects) {
    if (!e.ok())
      continue;
    const EffectCurve& c = e.curve;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      out << to_string(e.kind) << ',' << i << ',' << cell(c.grid, i) << ','
          << cell(c.levels, i) << ',' << cell(c.estimates, i) << ','
          << cell(c.se, i) << ',' << cell(c.band_lo, i) << ','
          << cell(c.band_hi, i) << ',' << cell(c.bandwidths, i) << '\n';
    }
  }
}

void
write_bandwidth_csv(std::ostream& out, const RunConfig& cfg,
                    const std::vector<BandwidthSchedule>& schedules)
{
  out << "effect,index,grid,pilot,main,lower_clamp,upper_clamp\n";
  for (std::size_t e = 0; e < schedules.size(); ++e) {
    const auto& s = schedules[e];
    for (Eigen::Index i = 0; i < s.grid.size(); ++i) {
      out << to_string(cfg.effects[e]) << ',' << i << ',' << cell(s.grid, i)
          << ',' << cell(s.pilot, i) << ',' << cell(s.main, i) << ','
          << cell(s.lower_clamp) << ',' << cell(s.upper_clamp) << '\n';
    }
  }
}

void
write_study_csv(std::ostream& out, const StudyReport& report)
{
  out << "effect,n,index,grid,truth,mean_estimate,bias,bias_ratio,"
         "absolute_bias,rmse,mean_bandwidth,uniform_coverage,completed,"
         "failures\n";
  for (const auto& s : report.summaries) {
    for (Eigen::Index i = 0; i < s.grid.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const bool ab = k < s.absolute_bias.size() && s.absolute_bias[k];
      out << to_string(s.kind) << ',' << s.n << ',' << i << ','
          << cell(s.grid, i) << ',' << cell(s.truth, i) << ','
          << cell(s.mean_estimate, i) << ',' << cell(s.bias, i) << ','
          << cell(s.bias_ratio, i) << ',' << (ab ? 1 : 0) << ','
          << cell(s.rmse, i) << ',' << cell(s.mean_bandwidth, i) << ','
          << cell(s.uniform_coverage) << ',' << s.completed << ','
          << s.failures << '\n';
    }
  }
}

} // namespace rkd
