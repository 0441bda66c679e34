#include "rkd/config.hpp"

#include "rkd/errors.hpp"
#include "rkd/kernel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rkd {

namespace {

using nlohmann::json;

std::string
trim(const std::string& s)
{
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
    ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
    --b;
  std::string out = s.substr(a, b - a);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
    out = out.substr(1, out.size() - 2);
  return out;
}

// Parses the whole string as a double; nullopt on any leftover characters.
std::optional<double>
parse_double(const std::string& s)
{
  if (s.empty())
    return std::nullopt;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+')
    ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    return std::nullopt;
  return v;
}

std::vector<std::string>
split_commas(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

// "0.04x", "0.04*x", "x" -> 0.04, 0.04, 1
std::optional<double>
parse_linear_term(const std::string& s)
{
  if (s.empty() || s.back() != 'x')
    return std::nullopt;
  std::string coef = s.substr(0, s.size() - 1);
  if (!coef.empty() && coef.back() == '*')
    coef.pop_back();
  if (coef.empty() || coef == "+")
    return 1.0;
  if (coef == "-")
    return -1.0;
  return parse_double(coef);
}

void
reject_unknown(const json& obj, const std::set<std::string>& known,
               const std::string& where)
{
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

const json&
require_object(const json& j, const std::string& where)
{
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object");
  return j;
}

double
get_number(const json& j, const std::string& key)
{
  if (!j.is_number())
    throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

int
get_int(const json& j, const std::string& key)
{
  if (!j.is_number_integer())
    throw ConfigError("'" + key + "' must be an integer");
  return j.get<int>();
}

std::string
get_string(const json& j, const std::string& key)
{
  if (!j.is_string())
    throw ConfigError("'" + key + "' must be a string");
  return j.get<std::string>();
}

bool
get_bool(const json& j, const std::string& key)
{
  if (!j.is_boolean())
    throw ConfigError("'" + key + "' must be true or false");
  return j.get<bool>();
}

Eigen::VectorXd
get_vector(const json& j, const std::string& key)
{
  if (!j.is_array())
    throw ConfigError("'" + key + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = get_number(j[i], key);
  return v;
}

json
vector_json(const Eigen::VectorXd& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v[i]);
  return a;
}

BandwidthMode
bandwidth_mode_from_name(const std::string& name)
{
  if (name == "plugin")
    return BandwidthMode::plugin;
  if (name == "fixed")
    return BandwidthMode::fixed;
  throw ConfigError("unknown bandwidth mode '" + name + "'");
}

} // namespace

KinkDesign
parse_kink_rule(const std::string& rule)
{
  std::string s;
  for (char c : rule) {
    if (!std::isspace(static_cast<unsigned char>(c)))
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  const std::string bad = "kink rule '" + rule + "' is not of the form min(a*x, cap)";
  if (s.size() < 6 || s.rfind("min(", 0) != 0 || s.back() != ')')
    throw ConfigError(bad);
  const std::string inner = s.substr(4, s.size() - 5);
  const auto comma = inner.find(',');
  if (comma == std::string::npos || inner.find(',', comma + 1) != std::string::npos)
    throw ConfigError(bad);
  std::string lhs = inner.substr(0, comma);
  std::string rhs = inner.substr(comma + 1);
  if (lhs.find('x') == std::string::npos)
    std::swap(lhs, rhs);
  const auto a = parse_linear_term(lhs);
  const auto cap = parse_double(rhs);
  if (!a || !cap || !std::isfinite(*a) || !std::isfinite(*cap))
    throw ConfigError(bad);
  if (*a == 0.0)
    throw ConfigError("kink rule '" + rule + "' has no kink: slope is zero");
  KinkDesign d;
  d.x0 = *cap / *a;
  // a x < cap left of x0 when a > 0, right of x0 when a < 0
  d.slope_left = *a > 0.0 ? *a : 0.0;
  d.slope_right = *a > 0.0 ? 0.0 : *a;
  return d;
}

KinkDesign
RunConfig::kink() const
{
  if (design && rule)
    throw ConfigError("give either an explicit kink or a rule, not both");
  if (!design && !rule)
    throw ConfigError("a kink (x0 and slopes) or a rule is required");
  const KinkDesign d = design ? *design : parse_kink_rule(*rule);
  if (!std::isfinite(d.x0) || !std::isfinite(d.slope_left) ||
      !std::isfinite(d.slope_right))
    throw ConfigError("kink location and slopes must be finite");
  d.validate();
  return d;
}

AnalysisOptions
RunConfig::analysis_options() const
{
  AnalysisOptions o;
  o.design = kink();
  o.effects = effects;
  o.tau_grid = tau_grid;
  o.integration_grid = integration_grid;
  o.y_grid = y_grid;
  o.p = p;
  o.q = q;
  o.kernel = KernelSpec::from_name(kernel);
  o.boot = boot;
  o.level = level;
  o.seed = seed;
  o.fixed_bandwidth = bandwidth;
  o.quantile_selector.bh_constant = bh_constant;
  o.quantile_selector.bh_b = bh_b;
  o.influence_scaling = influence_scaling;
  o.lorenz_rescale = lorenz_rescale;
  return o;
}

StudyConfig
RunConfig::study_config() const
{
  StudyConfig s;
  s.effects = effects;
  s.n_list = simulation.n_list;
  s.reps = simulation.reps;
  s.boot = boot;
  s.seed = seed;
  s.level = level;
  s.p = p;
  s.q = q;
  s.kernel = KernelSpec::from_name(kernel);
  s.bandwidth_mode = simulation.bandwidth_mode;
  if (simulation.bandwidth_mode == BandwidthMode::fixed) {
    if (!bandwidth)
      throw ConfigError("fixed bandwidth mode needs 'bandwidth'");
    s.fixed_bandwidth = *bandwidth;
  }
  s.tau_grid = tau_grid;
  s.integration_grid = integration_grid;
  s.bh_constant = bh_constant;
  s.bh_b = bh_b;
  s.influence_scaling = influence_scaling;
  s.dgp = simulation.dgp;
  s.workers = simulation.workers;
  return s;
}

void
RunConfig::validate() const
{
  if (input.empty())
    throw ConfigError("an input file is required");
  if (columns.y.empty() || columns.x.empty())
    throw ConfigError("outcome and running-variable columns must be named");
  analysis_options().validate();
}

void
RunConfig::validate_simulation() const
{
  if (y_grid.size() > 0)
    throw ConfigError("the simulation evaluates the distributional effect at "
                      "estimated quantiles; 'y_grid' must be empty");
  if (simulation.workers < 0)
    throw ConfigError("worker count must be non-negative");
  study_config().validate();
}

nlohmann::json
to_json(const RunConfig& cfg)
{
  json j;
  j["input"] = cfg.input;
  json cols = { { "y", cfg.columns.y }, { "x", cfg.columns.x } };
  if (cfg.columns.b)
    cols["b"] = *cfg.columns.b;
  j["columns"] = cols;
  if (cfg.design) {
    j["kink"] = { { "x0", cfg.design->x0 },
                  { "slope_left", cfg.design->slope_left },
                  { "slope_right", cfg.design->slope_right } };
  }
  if (cfg.rule)
    j["rule"] = *cfg.rule;
  json eff = json::array();
  for (const auto k : cfg.effects)
    eff.push_back(to_string(k));
  j["effects"] = eff;
  j["tau_grid"] = vector_json(cfg.tau_grid);
  j["integration_grid"] = vector_json(cfg.integration_grid);
  if (cfg.y_grid.size() > 0)
    j["y_grid"] = vector_json(cfg.y_grid);
  else
    j["y_grid"] = "quantiles";
  j["p"] = cfg.p;
  j["q"] = cfg.q;
  j["kernel"] = cfg.kernel;
  j["boot"] = cfg.boot;
  j["level"] = cfg.level;
  j["seed"] = cfg.seed;
  j["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json(nullptr);
  j["density"] = { { "constant", cfg.bh_constant }, { "scale", cfg.bh_b } };
  j["influence_scaling"] = to_string(cfg.influence_scaling);
  j["lorenz_rescale"] = cfg.lorenz_rescale;
  const auto& sim = cfg.simulation;
  j["simulation"] = {
    { "n", sim.n_list },
    { "reps", sim.reps },
    { "bandwidth_mode",
      sim.bandwidth_mode == BandwidthMode::plugin ? "plugin" : "fixed" },
    { "dgp",
      { { "sigma_x", sim.dgp.sigma_x },
        { "sigma_eps", sim.dgp.sigma_eps },
        { "rho", sim.dgp.rho } } },
    { "workers", sim.workers },
  };
  return j;
}

RunConfig
run_config_from_json(const nlohmann::json& doc)
{
  require_object(doc, "config");
  reject_unknown(doc,
                 { "input", "columns", "kink", "rule", "effects", "tau_grid",
                   "integration_grid", "y_grid", "p", "q", "kernel", "boot",
                   "level", "seed", "bandwidth", "density",
                   "influence_scaling", "lorenz_rescale", "simulation" },
                 "config");
  RunConfig c;
  if (doc.contains("input"))
    c.input = get_string(doc["input"], "input");
  if (doc.contains("columns")) {
    const json& cols = require_object(doc["columns"], "'columns'");
    reject_unknown(cols, { "y", "x", "b" }, "'columns'");
    if (cols.contains("y"))
      c.columns.y = get_string(cols["y"], "columns.y");
    if (cols.contains("x"))
      c.columns.x = get_string(cols["x"], "columns.x");
    if (cols.contains("b") && !cols["b"].is_null())
      c.columns.b = get_string(cols["b"], "columns.b");
  }
  if (doc.contains("kink") && !doc["kink"].is_null()) {
    const json& k = require_object(doc["kink"], "'kink'");
    reject_unknown(k, { "x0", "slope_left", "slope_right" }, "'kink'");
    for (const char* key : { "x0", "slope_left", "slope_right" }) {
      if (!k.contains(key))
        throw ConfigError(std::string("'kink' needs '") + key + "'");
    }
    KinkDesign d;
    d.x0 = get_number(k["x0"], "kink.x0");
    d.slope_left = get_number(k["slope_left"], "kink.slope_left");
    d.slope_right = get_number(k["slope_right"], "kink.slope_right");
    c.design = d;
  }
  if (doc.contains("rule") && !doc["rule"].is_null())
    c.rule = get_string(doc["rule"], "rule");
  if (doc.contains("effects")) {
    const json& e = doc["effects"];
    if (!e.is_array())
      throw ConfigError("'effects' must be an array of names");
    c.effects.clear();
    for (const auto& name : e)
      c.effects.push_back(effect_from_name(get_string(name, "effects")));
  }
  if (doc.contains("tau_grid"))
    c.tau_grid = get_vector(doc["tau_grid"], "tau_grid");
  if (doc.contains("integration_grid"))
    c.integration_grid = get_vector(doc["integration_grid"], "integration_grid");
  if (doc.contains("y_grid")) {
    const json& yg = doc["y_grid"];
    if (yg.is_string()) {
      if (yg.get<std::string>() != "quantiles")
        throw ConfigError("'y_grid' must be \"quantiles\" or an array");
    } else {
      c.y_grid = get_vector(yg, "y_grid");
    }
  }
  if (doc.contains("p"))
    c.p = get_int(doc["p"], "p");
  if (doc.contains("q"))
    c.q = get_int(doc["q"], "q");
  if (doc.contains("kernel"))
    c.kernel = get_string(doc["kernel"], "kernel");
  if (doc.contains("boot"))
    c.boot = get_int(doc["boot"], "boot");
  if (doc.contains("level"))
    c.level = get_number(doc["level"], "level");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned())
      throw ConfigError("'seed' must be a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("bandwidth") && !doc["bandwidth"].is_null())
    c.bandwidth = get_number(doc["bandwidth"], "bandwidth");
  if (doc.contains("density")) {
    const json& d = require_object(doc["density"], "'density'");
    reject_unknown(d, { "constant", "scale" }, "'density'");
    if (d.contains("constant"))
      c.bh_constant = get_number(d["constant"], "density.constant");
    if (d.contains("scale"))
      c.bh_b = get_number(d["scale"], "density.scale");
  }
  if (doc.contains("influence_scaling"))
    c.influence_scaling = influence_scaling_from_name(
      get_string(doc["influence_scaling"], "influence_scaling"));
  if (doc.contains("lorenz_rescale"))
    c.lorenz_rescale = get_bool(doc["lorenz_rescale"], "lorenz_rescale");
  if (doc.contains("simulation")) {
    const json& s = require_object(doc["simulation"], "'simulation'");
    reject_unknown(s, { "n", "reps", "bandwidth_mode", "dgp", "workers" },
                   "'simulation'");
    if (s.contains("n")) {
      const json& n = s["n"];
      c.simulation.n_list.clear();
      if (n.is_array()) {
        for (const auto& v : n) {
          if (!v.is_number_integer())
            throw ConfigError("'simulation.n' must hold integers");
          c.simulation.n_list.push_back(v.get<std::int64_t>());
        }
      } else if (n.is_number_integer()) {
        c.simulation.n_list.push_back(n.get<std::int64_t>());
      } else {
        throw ConfigError("'simulation.n' must be an integer or an array");
      }
    }
    if (s.contains("reps"))
      c.simulation.reps = get_int(s["reps"], "simulation.reps");
    if (s.contains("bandwidth_mode"))
      c.simulation.bandwidth_mode = bandwidth_mode_from_name(
        get_string(s["bandwidth_mode"], "simulation.bandwidth_mode"));
    if (s.contains("dgp")) {
      const json& d = require_object(s["dgp"], "'simulation.dgp'");
      reject_unknown(d, { "sigma_x", "sigma_eps", "rho" }, "'simulation.dgp'");
      if (d.contains("sigma_x"))
        c.simulation.dgp.sigma_x = get_number(d["sigma_x"], "dgp.sigma_x");
      if (d.contains("sigma_eps"))
        c.simulation.dgp.sigma_eps = get_number(d["sigma_eps"], "dgp.sigma_eps");
      if (d.contains("rho"))
        c.simulation.dgp.rho = get_number(d["rho"], "dgp.rho");
    }
    if (s.contains("workers"))
      c.simulation.workers = get_int(s["workers"], "simulation.workers");
  }
  return c;
}

RunConfig
load_run_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      e.what());
  }
  if (doc.is_object() && doc.contains("schema") && doc.contains("config"))
    return run_config_from_json(doc["config"]);
  return run_config_from_json(doc);
}

IngestResult
ingest_csv(const std::string& path, const ColumnMapping& mapping)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read input file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("input file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  const auto header = split_commas(line);
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ConfigError("input file '" + path + "' has no column '" + name +
                        "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> idx{ column(mapping.y), column(mapping.x) };
  if (mapping.b)
    idx.push_back(column(*mapping.b));

  IngestResult out;
  std::vector<std::vector<double>> cols(idx.size());
  std::int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    ++out.rows_read;
    const auto cells = split_commas(line);
    std::vector<double> row;
    std::string problem;
    for (std::size_t k = 0; k < idx.size() && problem.empty(); ++k) {
      if (idx[k] >= cells.size()) {
        problem = "missing cell for column '" + header[idx[k]] + "'";
        break;
      }
      const auto v = parse_double(cells[idx[k]]);
      if (!v)
        problem = "cannot parse '" + cells[idx[k]] + "' in column '" +
                  header[idx[k]] + "'";
      else if (!std::isfinite(*v))
        problem = "non-finite value in column '" + header[idx[k]] + "'";
      else
        row.push_back(*v);
    }
    if (!problem.empty()) {
      out.warnings.push_back("line " + std::to_string(lineno) +
                             " skipped: " + problem);
      continue;
    }
    for (std::size_t k = 0; k < idx.size(); ++k)
      cols[k].push_back(row[k]);
  }
  if (cols[0].empty())
    throw ConfigError("input file '" + path + "' has no usable rows");
  const auto vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()))
      .eval();
  };
  out.sample.y = vec(cols[0]);
  out.sample.x = vec(cols[1]);
  if (mapping.b)
    out.sample.b = vec(cols[2]);
  return out;
}

} // namespace rkd
