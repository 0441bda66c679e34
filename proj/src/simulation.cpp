#include "rkd/simulation.hpp"

#include "rkd/bandwidth.hpp"
#include "rkd/density.hpp"
#include "rkd/errors.hpp"
#include "rkd/inference.hpp"
#include "rkd/parallel.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/random.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace rkd {

void
DgpConfig::validate() const
{
  if (!(sigma_x > 0.0) || !(sigma_eps > 0.0))
    throw ConfigError("DGP standard deviations must be positive");
  if (!(std::abs(rho) < 1.0))
    throw ConfigError("DGP correlation must lie in (-1, 1)");
  if (n < 1)
    throw ConfigError("DGP sample size must be positive");
}

double
DgpConfig::sigma_tilde() const
{
  return sigma_eps * std::sqrt(1.0 - rho * rho);
}

KinkDesign
dgp_design()
{
  return KinkDesign{ 0.0, 1.0, -1.0 };
}

Sample
generate_dgp(const DgpConfig& cfg)
{
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n);
  Sample s;
  s.x.resize(n);
  s.y.resize(n);
  Eigen::VectorXd b(n);
  CounterRng rng = CounterRng::stream(cfg.seed, streams::dgp, 0);
  const double tail = std::sqrt(1.0 - cfg.rho * cfg.rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double xv = cfg.sigma_x * z1;
    const double e = cfg.sigma_eps * (cfg.rho * z1 + tail * z2);
    const double bv = std::abs(xv);
    s.x[i] = xv;
    b[i] = bv;
    s.y[i] = 1.0 + 0.5 * bv + xv + 0.1 * xv * xv + 1.5 * bv * xv +
             (1.0 + 2.0 * bv) * e;
  }
  s.b = std::move(b);
  return s;
}

namespace {
const boost::math::normal std_normal;

double
phi(double z)
{
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
} // namespace

Eigen::VectorXd
true_conditional_quantiles(const Eigen::VectorXd& tau, const DgpConfig& cfg)
{
  Eigen::VectorXd out(tau.size());
  for (Eigen::Index i = 0; i < tau.size(); ++i)
    out[i] = 1.0 + cfg.sigma_tilde() * boost::math::quantile(std_normal, tau[i]);
  return out;
}

double
true_conditional_density(double y, const DgpConfig& cfg)
{
  const double s = cfg.sigma_tilde();
  return phi((y - 1.0) / s) / s;
}

Eigen::VectorXd
true_distributional_at(const Eigen::VectorXd& y, const DgpConfig& cfg)
{
  // d/db Phi((y - 1 - b/2) / ((1 + 2b) s)) at b = 0
  const double s = cfg.sigma_tilde();
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = y[i] - 1.0;
    out[i] = phi(t / s) * (-0.5 - 2.0 * t) / s;
  }
  return out;
}

Eigen::VectorXd
true_effects(EffectKind kind, const Eigen::VectorXd& grid, const DgpConfig& cfg)
{
  const double s = cfg.sigma_tilde();
  switch (kind) {
    case EffectKind::mean:
      return Eigen::VectorXd::Constant(1, 0.5);
    case EffectKind::distributional:
      return true_distributional_at(true_conditional_quantiles(grid, cfg), cfg);
    case EffectKind::quantile: {
      Eigen::VectorXd out(grid.size());
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        out[i] = 0.5 + 2.0 * s * boost::math::quantile(std_normal, grid[i]);
      return out;
    }
    case EffectKind::lorenz: {
      Eigen::VectorXd out(grid.size());
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        out[i] = -1.5 * s * phi(boost::math::quantile(std_normal, grid[i]));
      return out;
    }
  }
  throw ConfigError("unknown effect kind");
}

} // namespace rkd

namespace rkd {

void
StudyConfig::validate() const
{
  dgp.validate();
  if (effects.empty())
    throw ConfigError("study needs at least one effect");
  if (n_list.empty())
    throw ConfigError("study needs at least one sample size");
  for (auto n : n_list) {
    if (n < 50)
      throw ConfigError("study sample sizes must be at least 50");
  }
  if (reps < 1)
    throw ConfigError("study needs at least one replication");
  if (boot != 0 && boot < 2)
    throw ConfigError("bootstrap draws must be 0 (off) or at least 2");
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("significance level must lie in (0, 1)");
  if (p < 1 || q <= p)
    throw ConfigError("orders must satisfy 1 <= p < q");
  if (bandwidth_mode == BandwidthMode::fixed &&
      !(fixed_bandwidth > 0.0 && std::isfinite(fixed_bandwidth)))
    throw ConfigError("fixed bandwidth mode needs a positive bandwidth");
  validate_level_grid(tau_grid, "reporting grid");
  validate_level_grid(integration_grid, "integration grid");
}

const EffectSummary&
StudyReport::find(EffectKind kind, std::int64_t n) const
{
  for (const auto& s : summaries) {
    if (s.kind == kind && s.n == n)
      return s;
  }
  throw std::out_of_range("no summary for effect " + to_string(kind) +
                          " at n = " + std::to_string(n));
}

namespace {

struct ReplicationSeeds
{
  std::uint64_t data = 0;
  std::uint64_t boot = 0;
};

ReplicationSeeds
replication_seeds(std::uint64_t master, std::int64_t n, int rep)
{
  CounterRng rng = CounterRng::stream(
    master, streams::replication ^ mix64(static_cast<std::uint64_t>(n)),
    static_cast<std::uint64_t>(rep));
  ReplicationSeeds s;
  s.data = rng.next_u64();
  s.boot = rng.next_u64();
  return s;
}

AnalysisOptions
analysis_options(const StudyConfig& cfg, std::uint64_t boot_seed)
{
  AnalysisOptions o;
  o.design = dgp_design();
  o.effects = cfg.effects;
  o.tau_grid = cfg.tau_grid;
  o.integration_grid = cfg.integration_grid;
  o.p = cfg.p;
  o.q = cfg.q;
  o.kernel = cfg.kernel;
  o.boot = cfg.boot;
  o.level = cfg.level;
  o.seed = boot_seed;
  if (cfg.bandwidth_mode == BandwidthMode::fixed)
    o.fixed_bandwidth = cfg.fixed_bandwidth;
  o.quantile_selector.bh_constant = cfg.bh_constant;
  o.quantile_selector.bh_b = cfg.bh_b;
  o.influence_scaling = cfg.influence_scaling;
  o.bands = cfg.boot > 0;
  o.tests = false;
  o.capture_errors = true;
  return o;
}

} // namespace

ReplicationResult
run_replication(const StudyConfig& cfg, std::int64_t n, int rep)
{
  const ReplicationSeeds seeds = replication_seeds(cfg.seed, n, rep);
  DgpConfig dgp = cfg.dgp;
  dgp.n = n;
  dgp.seed = seeds.data;
  const AnalysisResult res =
    analyze(generate_dgp(dgp), analysis_options(cfg, seeds.boot));

  ReplicationResult out;
  for (const auto& e : res.effects) {
    out.curves.push_back(e.curve);
    out.errors.push_back(e.error);
  }
  return out;
}

namespace {

EffectSummary
summarize(const StudyConfig& cfg, std::int64_t n, std::size_t e,
          const std::vector<ReplicationResult>& results)
{
  EffectSummary s;
  s.kind = cfg.effects[e];
  s.n = n;
  DgpConfig dgp = cfg.dgp;
  dgp.n = n;
  s.grid = s.kind == EffectKind::mean ? Eigen::VectorXd::Zero(1) : cfg.tau_grid;
  s.truth = true_effects(s.kind, s.grid, dgp);
  const Eigen::Index g = s.grid.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(g);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(g);
  Eigen::VectorXd hsum = Eigen::VectorXd::Zero(g);
  int covered = 0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& err = results[r].errors[e];
    if (!err.empty()) {
      ++s.failures;
      s.failure_messages.push_back("replication " + std::to_string(r) + ": " +
                                   err);
      continue;
    }
    const EffectCurve& c = results[r].curves[e];
    ++s.completed;
    const Eigen::VectorXd d = c.estimates - s.truth;
    sum += c.estimates;
    sq += d.cwiseProduct(d);
    hsum += c.bandwidths;
    if (cfg.boot > 0 && c.band_lo.size() == g) {
      bool all = true;
      for (Eigen::Index j = 0; j < g; ++j)
        all = all && c.band_lo[j] <= s.truth[j] && s.truth[j] <= c.band_hi[j];
      covered += all ? 1 : 0;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (s.completed == 0) {
    s.mean_estimate = s.bias = s.bias_ratio = s.rmse = s.mean_bandwidth =
      Eigen::VectorXd::Constant(g, nan);
    s.absolute_bias.assign(static_cast<std::size_t>(g), false);
    s.uniform_coverage = nan;
    return s;
  }
  const double m = s.completed;
  s.mean_estimate = sum / m;
  s.bias = s.mean_estimate - s.truth;
  s.rmse = (sq / m).cwiseSqrt();
  s.mean_bandwidth = hsum / m;
  s.bias_ratio.resize(g);
  s.absolute_bias.resize(static_cast<std::size_t>(g));
  for (Eigen::Index j = 0; j < g; ++j) {
    const bool abs_only = std::abs(s.truth[j]) < 1e-8;
    s.absolute_bias[static_cast<std::size_t>(j)] = abs_only;
    s.bias_ratio[j] = abs_only ? std::abs(s.bias[j])
                               : std::abs(s.bias[j]) / std::abs(s.truth[j]);
  }
  s.uniform_coverage = cfg.boot > 0 ? covered / m : nan;
  return s;
}

} // namespace

StudyReport
run_study(const StudyConfig& cfg)
{
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  StudyReport report;
  report.config = cfg;
  report.workers_used = cfg.workers > 0 ? cfg.workers : worker_count();
  for (const auto n : cfg.n_list) {
    std::vector<ReplicationResult> results(static_cast<std::size_t>(cfg.reps));
    parallel_for(
      results.size(),
      [&](std::size_t r) {
        results[r] = run_replication(cfg, n, static_cast<int>(r));
      },
      report.workers_used);
    for (std::size_t e = 0; e < cfg.effects.size(); ++e)
      report.summaries.push_back(summarize(cfg, n, e, results));
  }
  report.runtime_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
  return report;
}

} // namespace rkd
