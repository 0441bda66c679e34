#include "rkd/errors.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/report.hpp"
#include "rkd/simulation.hpp"

#include <doctest.h>
#include <sstream>

using namespace rkd;

namespace {

Sample
design_sample(std::int64_t n, std::uint64_t seed)
{
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return generate_dgp(cfg);
}

RunConfig
run_config()
{
  RunConfig c;
  c.input = "unused.csv";
  c.design = dgp_design();
  c.effects = { EffectKind::mean, EffectKind::quantile, EffectKind::distributional };
  c.tau_grid.resize(3);
  c.tau_grid << 0.25, 0.5, 0.75;
  c.boot = 200;
  c.seed = 5;
  return c;
}

IngestResult
ingest_of(const Sample& s)
{
  IngestResult r;
  r.sample = s;
  r.rows_read = s.size();
  return r;
}

std::vector<std::string>
split(const std::string& line)
{
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ','))
    cells.push_back(c);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

} // namespace

TEST_CASE("analysis report and curve table")
{
  const Sample s = design_sample(2000, 61);
  const RunConfig cfg = run_config();
  const AnalysisResult res = analyze(s, cfg.analysis_options());
  REQUIRE(res.effects.size() == 3);

  const nlohmann::json report = analysis_report("estimate", cfg, ingest_of(s), res);
  CHECK(report["schema"] == report_schema);
  CHECK(report["command"] == "estimate");
  CHECK(report["results"]["n"] == 2000);
  CHECK(report["results"]["kink"]["gap"] == 2.0);

  // text round trip keeps every double bit for bit
  const std::string text = report.dump(2);
  const nlohmann::json back = nlohmann::json::parse(text);
  CHECK(back == report);
  CHECK(back.dump(2) == text);
  const auto& est = back["results"]["effects"][1]["curve"]["estimates"];
  REQUIRE(est.size() == 3);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(est[static_cast<std::size_t>(j)].get<double>() == res.effects[1].curve.estimates[j]);
  CHECK(to_json(run_config_from_json(back["config"])) == report["config"]);

  std::ostringstream csv;
  write_curve_csv(csv, res);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "effect,index,grid,level,estimate,se,band_lo,band_hi,bandwidth");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    rows.push_back(split(line));
  REQUIRE(rows.size() == 1 + 3 + 3);
  for (const auto& r : rows)
    CHECK(r.size() == 9);
  CHECK(rows[0][0] == "mean");
  CHECK(rows[0][3].empty());
  CHECK(rows[1][0] == "quantile");
  CHECK(rows[3][1] == "2");
  CHECK(rows[4][0] == "distributional");
  CHECK(std::stod(rows[4][3]) == 0.25);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t e = k == 0 ? 0 : (k < 4 ? 1 : 2);
    const Eigen::Index j = std::stoi(rows[k][1]);
    const EffectCurve& c = res.effects[e].curve;
    CHECK(std::stod(rows[k][4]) == c.estimates[j]);
    CHECK(std::stod(rows[k][5]) == c.se[j]);
    CHECK(std::stod(rows[k][6]) == c.band_lo[j]);
    CHECK(std::stod(rows[k][7]) == c.band_hi[j]);
    CHECK(std::stod(rows[k][8]) == c.bandwidths[j]);
  }
}

TEST_CASE("test command results")
{
  const Sample s = design_sample(2000, 62);
  RunConfig cfg = run_config();
  AnalysisOptions o = cfg.analysis_options();
  o.bands = false;
  o.tests = true;
  const AnalysisResult res = analyze(s, o);
  for (const auto& e : res.effects) {
    REQUIRE(e.significance.has_value());
    const TestResult& t = *e.significance;
    CHECK(t.p_value >= 0.0);
    CHECK(t.p_value <= 1.0);
    CHECK(t.reject == (t.statistic > t.critical_value));
    CHECK(t.level == 0.05);
    if (e.kind == EffectKind::mean) {
      CHECK_FALSE(e.homogeneity.has_value());
    } else {
      REQUIRE(e.homogeneity.has_value());
      CHECK(e.homogeneity->p_value >= 0.0);
      CHECK(e.homogeneity->p_value <= 1.0);
      CHECK(e.homogeneity->reject ==
            (e.homogeneity->statistic > e.homogeneity->critical_value));
    }
    CHECK(e.curve.band_lo.size() == 0);
  }
  // the design has a large mean kink
  CHECK(res.effects[0].significance->reject);

  const nlohmann::json report = analysis_report("test", cfg, ingest_of(s), res);
  const auto& sig = report["results"]["effects"][0]["significance"];
  CHECK(sig["kind"] == "significance");
  CHECK(sig["p_value"].get<double>() == res.effects[0].significance->p_value);
}

TEST_CASE("bandwidth and study reports")
{
  const Sample s = design_sample(2000, 63);
  RunConfig cfg = run_config();
  cfg.effects = { EffectKind::mean, EffectKind::quantile };
  const auto schedules = select_bandwidths(s, cfg.analysis_options());
  REQUIRE(schedules.size() == 2);
  CHECK(schedules[0].main.size() == 1);
  CHECK(schedules[1].main.size() == 3);
  const nlohmann::json b = bandwidth_report(cfg, ingest_of(s), schedules);
  CHECK(b["results"]["schedules"][1]["effect"] == "quantile");
  CHECK(b["results"]["schedules"][1]["main"][2].get<double>() == schedules[1].main[2]);

  std::ostringstream bcsv;
  write_bandwidth_csv(bcsv, cfg, schedules);
  std::istringstream bin(bcsv.str());
  std::string line;
  std::getline(bin, line);
  CHECK(line == "effect,index,grid,pilot,main,lower_clamp,upper_clamp");
  int rows = 0;
  while (std::getline(bin, line))
    ++rows;
  CHECK(rows == 4);

  AnalysisOptions fixed = cfg.analysis_options();
  fixed.fixed_bandwidth = 0.1;
  CHECK_THROWS_AS(select_bandwidths(s, fixed), ConfigError);

  RunConfig sim;
  sim.effects = { EffectKind::mean, EffectKind::quantile };
  sim.tau_grid.resize(2);
  sim.tau_grid << 0.25, 0.75;
  sim.boot = 0;
  sim.simulation.n_list = { 500, 1000 };
  sim.simulation.reps = 3;
  const StudyReport study = run_study(sim.study_config());
  const nlohmann::json j = study_report(sim, study);
  CHECK(j["command"] == "simulate");
  CHECK(j["results"]["summaries"].size() == 4);
  CHECK(j["runtime"].contains("seconds"));
  CHECK_FALSE(j["results"].contains("runtime"));
  std::ostringstream scsv;
  write_study_csv(scsv, study);
  std::istringstream sin(scsv.str());
  std::getline(sin, line);
  CHECK(line == "effect,n,index,grid,truth,mean_estimate,bias,bias_ratio,absolute_bias,"
                "rmse,mean_bandwidth,uniform_coverage,completed,failures");
  rows = 0;
  while (std::getline(sin, line)) {
    CHECK(split(line).size() == 14);
    ++rows;
  }
  CHECK(rows == 2 * (1 + 2));
}

TEST_CASE("option validation and captured failures")
{
  const Sample s = design_sample(500, 64);
  const auto bad = [&](auto&& edit) {
    AnalysisOptions o;
    o.boot = 0;
    edit(o);
    CHECK_THROWS_AS(analyze(s, o), ConfigError);
  };
  bad([](AnalysisOptions& o) { o.effects.clear(); });
  bad([](AnalysisOptions& o) { o.q = o.p; });
  bad([](AnalysisOptions& o) { o.boot = 1; });
  bad([](AnalysisOptions& o) { o.level = 0.0; });
  bad([](AnalysisOptions& o) { o.fixed_bandwidth = -1.0; });
  bad([](AnalysisOptions& o) { o.design.slope_left = o.design.slope_right; });
  bad([](AnalysisOptions& o) {
    o.tau_grid.resize(2);
    o.tau_grid << 0.6, 0.4;
  });
  bad([](AnalysisOptions& o) {
    o.y_grid.resize(2);
    o.y_grid << 1.0, 1.0;
  });

  AnalysisOptions tiny;
  tiny.boot = 0;
  tiny.fixed_bandwidth = 1e-6;
  CHECK_THROWS_AS(analyze(s, tiny), RkdError);
  try {
    analyze(s, tiny);
  } catch (const RkdError& e) {
    CHECK(std::string(e.what()).rfind("mean effect: ", 0) == 0);
  }
  tiny.capture_errors = true;
  tiny.effects = { EffectKind::mean, EffectKind::quantile };
  const AnalysisResult r = analyze(s, tiny);
  REQUIRE(r.effects.size() == 2);
  CHECK_FALSE(r.effects[0].ok());
  CHECK_FALSE(r.effects[1].ok());

  RunConfig cfg = run_config();
  const nlohmann::json report = analysis_report("estimate", cfg, ingest_of(s), r);
  CHECK(report["results"]["effects"][0]["ok"] == false);
  CHECK(report["results"]["effects"][0]["error"].get<std::string>() == r.effects[0].error);
  std::ostringstream csv;
  write_curve_csv(csv, r);
  CHECK(csv.str() == "effect,index,grid,level,estimate,se,band_lo,band_hi,bandwidth\n");
}
