#include "rkd/config.hpp"
#include "rkd/errors.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/report.hpp"
#include "rkd/simulation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

//! Command-line values; each one overrides the config only when given.
struct Flags
{
  std::string config;
  std::string input;
  std::string out;
  std::string csv;
  std::vector<std::string> effects;
  std::vector<double> tau_grid;
  std::vector<double> y_grid;
  std::string rule;
  double x0 = 0.0;
  double slope_left = 0.0;
  double slope_right = 0.0;
  std::string y_column;
  std::string x_column;
  int p = 0;
  int q = 0;
  std::string kernel;
  int boot = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
  double bandwidth = 0.0;
  int reps = 0;
  std::vector<std::int64_t> n_list;
  int workers = 0;
};

struct Options
{
  CLI::Option* input = nullptr;
  CLI::Option* effects = nullptr;
  CLI::Option* tau_grid = nullptr;
  CLI::Option* y_grid = nullptr;
  CLI::Option* rule = nullptr;
  CLI::Option* x0 = nullptr;
  CLI::Option* slope_left = nullptr;
  CLI::Option* slope_right = nullptr;
  CLI::Option* y_column = nullptr;
  CLI::Option* x_column = nullptr;
  CLI::Option* p = nullptr;
  CLI::Option* q = nullptr;
  CLI::Option* kernel = nullptr;
  CLI::Option* boot = nullptr;
  CLI::Option* level = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* bandwidth = nullptr;
  CLI::Option* reps = nullptr;
  CLI::Option* n_list = nullptr;
  CLI::Option* workers = nullptr;
};

void
add_common(CLI::App* app, Flags& f, Options& o)
{
  app->add_option("--config", f.config,
                  "JSON config file, or a report whose config is re-run");
  app->add_option("--out", f.out, "JSON report path (default: stdout)");
  app->add_option("--csv", f.csv, "flat CSV of per-grid-point rows");
  o.effects = app->add_option("--effect", f.effects,
                              "effects: mean, distributional, quantile, lorenz")
                ->delimiter(',');
  o.tau_grid =
    app->add_option("--tau-grid", f.tau_grid, "quantile levels, comma separated")
      ->delimiter(',');
  o.p = app->add_option("--p", f.p, "local polynomial order");
  o.q = app->add_option("--q", f.q, "pilot polynomial order");
  o.kernel = app->add_option("--kernel", f.kernel,
                             "tricube, triangular, epanechnikov, or uniform");
  o.boot = app->add_option("--boot", f.boot, "simulated process draws");
  o.level = app->add_option("--level", f.level, "significance level");
  o.seed = app->add_option("--seed", f.seed, "master seed");
  o.bandwidth = app->add_option("--bandwidth", f.bandwidth,
                                "one fixed bandwidth instead of plug-in");
}

void
add_data(CLI::App* app, Flags& f, Options& o)
{
  o.input = app->add_option("--input", f.input, "comma-delimited data file");
  o.y_column = app->add_option("--y-column", f.y_column, "outcome column");
  o.x_column = app->add_option("--x-column", f.x_column, "running variable");
  o.rule = app->add_option("--rule", f.rule, "kink rule, e.g. min(0.04x, 205)");
  o.x0 = app->add_option("--x0", f.x0, "kink location");
  o.slope_left = app->add_option("--slope-left", f.slope_left,
                                 "rule slope left of the kink");
  o.slope_right = app->add_option("--slope-right", f.slope_right,
                                  "rule slope right of the kink");
  o.y_grid = app->add_option("--y-grid", f.y_grid,
                             "outcome points of the distributional effect")
               ->delimiter(',');
}

Eigen::VectorXd
to_vector(const std::vector<double>& v)
{
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

rkd::RunConfig
merged_config(const Flags& f, const Options& o)
{
  rkd::RunConfig c = f.config.empty() ? rkd::RunConfig{}
                                      : rkd::load_run_config(f.config);
  const auto given = [](const CLI::Option* opt) {
    return opt != nullptr && opt->count() > 0;
  };
  if (given(o.input))
    c.input = f.input;
  if (given(o.y_column))
    c.columns.y = f.y_column;
  if (given(o.x_column))
    c.columns.x = f.x_column;
  if (given(o.rule)) {
    c.rule = f.rule;
    c.design.reset();
  }
  const int kink_flags =
    (given(o.x0) ? 1 : 0) + (given(o.slope_left) ? 1 : 0) +
    (given(o.slope_right) ? 1 : 0);
  if (kink_flags > 0) {
    if (kink_flags != 3)
      throw rkd::ConfigError("--x0, --slope-left and --slope-right go together");
    if (given(o.rule))
      throw rkd::ConfigError("give either --rule or an explicit kink");
    c.design = rkd::KinkDesign{ f.x0, f.slope_right, f.slope_left };
    c.rule.reset();
  }
  if (given(o.effects)) {
    c.effects.clear();
    for (const auto& e : f.effects)
      c.effects.push_back(rkd::effect_from_name(e));
  }
  if (given(o.tau_grid))
    c.tau_grid = to_vector(f.tau_grid);
  if (given(o.y_grid))
    c.y_grid = to_vector(f.y_grid);
  if (given(o.p))
    c.p = f.p;
  if (given(o.q))
    c.q = f.q;
  if (given(o.kernel))
    c.kernel = f.kernel;
  if (given(o.boot))
    c.boot = f.boot;
  if (given(o.level))
    c.level = f.level;
  if (given(o.seed))
    c.seed = f.seed;
  if (given(o.bandwidth)) {
    c.bandwidth = f.bandwidth;
    c.simulation.bandwidth_mode = rkd::BandwidthMode::fixed;
  }
  if (given(o.reps))
    c.simulation.reps = f.reps;
  if (given(o.n_list))
    c.simulation.n_list = f.n_list;
  if (given(o.workers))
    c.simulation.workers = f.workers;
  return c;
}

void
emit_json(const nlohmann::json& j, const std::string& path)
{
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out)
    throw rkd::ConfigError("cannot write '" + path + "'");
  out << text;
}

template <class Writer>
void
emit_csv(const std::string& path, Writer&& write)
{
  if (path.empty())
    return;
  std::ofstream out(path);
  if (!out)
    throw rkd::ConfigError("cannot write '" + path + "'");
  write(out);
}

void
print_warnings(const std::vector<std::string>& w)
{
  for (const auto& s : w)
    std::cerr << "warning: " << s << "\n";
}

rkd::IngestResult
load_data(const rkd::RunConfig& c)
{
  c.validate();
  rkd::IngestResult data = rkd::ingest_csv(c.input, c.columns);
  print_warnings(data.warnings);
  return data;
}

void
run_analysis(const std::string& command, const Flags& f, const Options& o)
{
  const rkd::RunConfig c = merged_config(f, o);
  const rkd::IngestResult data = load_data(c);
  rkd::AnalysisOptions opts = c.analysis_options();
  opts.bands = command != "test";
  opts.tests = command == "test";
  if (opts.tests && c.boot == 0)
    throw rkd::ConfigError("the test command needs --boot > 0");
  if (command == "band" && c.boot == 0)
    throw rkd::ConfigError("the band command needs --boot > 0");
  const rkd::AnalysisResult result = rkd::analyze(data.sample, opts);
  for (const auto& e : result.effects)
    print_warnings(e.warnings);
  emit_json(rkd::analysis_report(command, c, data, result), f.out);
  emit_csv(f.csv, [&](std::ostream& s) { rkd::write_curve_csv(s, result); });
}

void
run_bandwidth(const Flags& f, const Options& o)
{
  const rkd::RunConfig c = merged_config(f, o);
  const rkd::IngestResult data = load_data(c);
  const auto schedules =
    rkd::select_bandwidths(data.sample, c.analysis_options());
  for (const auto& s : schedules)
    print_warnings(s.all_warnings());
  emit_json(rkd::bandwidth_report(c, data, schedules), f.out);
  emit_csv(f.csv, [&](std::ostream& s) {
    rkd::write_bandwidth_csv(s, c, schedules);
  });
}

void
run_simulate(const Flags& f, const Options& o)
{
  const rkd::RunConfig c = merged_config(f, o);
  c.validate_simulation();
  const rkd::StudyReport report = rkd::run_study(c.study_config());
  for (const auto& s : report.summaries) {
    if (s.failures > 0)
      std::cerr << "warning: " << rkd::to_string(s.kind) << " at n = " << s.n
                << ": " << s.failures << " failed replications\n";
  }
  emit_json(rkd::study_report(c, report), f.out);
  emit_csv(f.csv, [&](std::ostream& s) { rkd::write_study_csv(s, report); });
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{ "Estimation and inference for regression kink designs" };
  app.require_subcommand(1);

  Flags f;
  const char* analysis_commands[][2] = {
    { "estimate", "estimates with standard errors and uniform bands" },
    { "test", "significance and homogeneity tests" },
    { "band", "uniform confidence bands" },
  };
  std::vector<std::pair<CLI::App*, Options>> analysis(3);
  for (std::size_t k = 0; k < analysis.size(); ++k) {
    auto& [sub, opts] = analysis[k];
    sub = app.add_subcommand(analysis_commands[k][0], analysis_commands[k][1]);
    add_common(sub, f, opts);
    add_data(sub, f, opts);
  }
  CLI::App* bw = app.add_subcommand("bandwidth", "plug-in bandwidth schedules");
  Options bw_o;
  add_common(bw, f, bw_o);
  add_data(bw, f, bw_o);
  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
  Options sim_o;
  add_common(sim, f, sim_o);
  sim_o.reps = sim->add_option("--reps", f.reps, "replications per n");
  sim_o.n_list =
    sim->add_option("--n", f.n_list, "sample sizes, comma separated")
      ->delimiter(',');
  sim_o.workers = sim->add_option(
    "--workers", f.workers, "worker threads (0: RKD_WORKERS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    for (const auto& [sub, opts] : analysis) {
      if (sub->parsed())
        run_analysis(sub->get_name(), f, opts);
    }
    if (bw->parsed())
      run_bandwidth(f, bw_o);
    if (sim->parsed())
      run_simulate(f, sim_o);
  } catch (const rkd::RkdError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
  return 0;
}
