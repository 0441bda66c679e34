//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! with status 1 when any criterion fails.

#include "oracles.hpp"
#include "rkd/errors.hpp"
#include "rkd/inference.hpp"
#include "rkd/kernel.hpp"
#include "rkd/local_fit.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/simulation.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>

using namespace rkd;

namespace {

const KernelSpec tricube{ KernelType::tricube };

struct Outcome
{
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what)
  {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void
report(int id, const char* name, Outcome& o)
{
  std::printf("%s criterion %d (%s):%s\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.str().c_str());
  std::fflush(stdout);
  if (!o.pass)
    ++failures;
}

Eigen::Index
index_of(const Eigen::VectorXd& grid, double value)
{
  Eigen::Index best = 0;
  (grid.array() - value).abs().minCoeff(&best);
  return best;
}

double
max_abs(const Eigen::MatrixXd& m)
{
  return m.cwiseAbs().maxCoeff();
}

// g = Gamma^{-1} (e1 - e2) and the closed-form variance factor g' Psi g.
double
variance_factor(const KernelConstants& c)
{
  Eigen::VectorXd sel = Eigen::VectorXd::Zero(c.gamma.rows());
  sel[1] = 1.0;
  sel[2] = -1.0;
  const Eigen::VectorXd g = c.gamma_inv * sel;
  return g.dot(c.psi_full * g);
}

//! Mean and median effect at n = 2000 under the plug-in bandwidths.
void
criteria_one_and_two()
{
  StudyConfig cfg;
  cfg.effects = { EffectKind::mean, EffectKind::quantile };
  cfg.n_list = { 2000 };
  cfg.reps = 500;
  cfg.boot = 500;
  const StudyReport r = run_study(cfg);

  const EffectSummary& m = r.find(EffectKind::mean, 2000);
  Outcome one;
  one.detail << " rmse=" << m.rmse[0] << " uniform_coverage=" << m.uniform_coverage
             << " failures=" << m.failures;
  one.require(m.rmse[0] >= 0.063 && m.rmse[0] <= 0.105, "rmse in [0.063, 0.105]");
  one.require(m.uniform_coverage >= 0.91 && m.uniform_coverage <= 0.98,
              "coverage in [0.91, 0.98]");
  report(1, "mean effect rmse and uniform coverage", one);

  const EffectSummary& q = r.find(EffectKind::quantile, 2000);
  const Eigen::Index j = index_of(q.grid, 0.5);
  Outcome two;
  two.detail << " rmse=" << q.rmse[j] << " bias_ratio=" << q.bias_ratio[j]
             << " uniform_coverage=" << q.uniform_coverage << " failures=" << q.failures;
  two.require(q.rmse[j] >= 0.088 && q.rmse[j] <= 0.146, "rmse in [0.088, 0.146]");
  two.require(q.bias_ratio[j] <= 0.05, "bias ratio <= 0.05");
  report(2, "median effect rmse and bias", two);
}

//! RMSE falls from n = 1000 to n = 4000 for every effect and grid point.
void
criterion_three()
{
  StudyConfig cfg;
  cfg.effects = { EffectKind::mean, EffectKind::distributional, EffectKind::quantile,
                  EffectKind::lorenz };
  cfg.n_list = { 1000, 4000 };
  cfg.reps = 500;
  cfg.boot = 0;
  const StudyReport r = run_study(cfg);
  Outcome o;
  for (const EffectKind k : cfg.effects) {
    const EffectSummary& small = r.find(k, 1000);
    const EffectSummary& large = r.find(k, 4000);
    int worse = 0;
    for (Eigen::Index j = 0; j < small.rmse.size(); ++j) {
      if (!(large.rmse[j] < small.rmse[j])) {
        ++worse;
        o.detail << " " << to_string(k) << "[" << small.grid[j] << "]:" << small.rmse[j]
                 << "->" << large.rmse[j];
      }
    }
    o.require(worse == 0, to_string(k) + " rmse does not fall at every point");
    o.require(small.failures == 0 && large.failures == 0,
              to_string(k) + " has failed replications");
  }
  report(3, "rmse decreases in n", o);
}

//! Closed-form and brute-force references.
void
criterion_four()
{
  Outcome o;
  const KernelSpec uniform{ KernelType::uniform };
  double kernel_err = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const KernelConstants c = kernel_constants(uniform, p, { p + 1 });
    kernel_err = std::max({ kernel_err, max_abs(c.gamma - oracle::uniform_gram(p, 1, 0)),
                            max_abs(c.psi_plus - oracle::uniform_gram(p, 2, 1)),
                            max_abs(c.psi_minus - oracle::uniform_gram(p, 2, -1)),
                            max_abs(c.psi_full - oracle::uniform_gram(p, 2, 0)),
                            max_abs(c.theta_plus.at(p + 1) -
                                    oracle::uniform_theta(p, p + 1, true)),
                            max_abs(c.theta_minus.at(p + 1) -
                                    oracle::uniform_theta(p, p + 1, false)) });
  }
  o.detail << " kernel_err=" << kernel_err;
  o.require(kernel_err < 1e-8, "uniform kernel constants");

  DgpConfig dgp;
  dgp.n = 400;
  dgp.seed = 101;
  const Sample s = generate_dgp(dgp);
  const int p = 2;
  const auto local_design = [&](double h, Eigen::MatrixXd& X, Eigen::VectorXd& w,
                                Eigen::VectorXd& y) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      if (eval_kernel(tricube, s.x[i] / h) > 0.0)
        keep.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    X.resize(m, 2 * p + 1);
    w.resize(m);
    y.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double d = s.x[keep[static_cast<std::size_t>(k)]];
      X.row(k) = oracle::basis(p, d).transpose();
      w[k] = eval_kernel(tricube, d / h);
      y[k] = s.y[keep[static_cast<std::size_t>(k)]];
    }
  };

  double wls_err = 0.0;
  for (double h : { 0.3, 0.6 }) {
    Eigen::MatrixXd X;
    Eigen::VectorXd w, y;
    local_design(h, X, w, y);
    const ConstrainedFit fit = fit_constrained_wls(s.y, s.x, 0.0, p, h, tricube);
    wls_err = std::max(wls_err, max_abs(fit.coeffs - oracle::normal_equations(X, y, w)));
  }
  o.detail << " wls_err=" << wls_err;
  o.require(wls_err < 1e-9, "weighted least squares against normal equations");

  double lp_rel = 0.0;
  for (double tau : { 0.25, 0.5 }) {
    const double h = 0.3;
    Eigen::MatrixXd X;
    Eigen::VectorXd w, y;
    local_design(h, X, w, y);
    const ConstrainedFit fit = fit_constrained_quantile(s.y, s.x, tau, 0.0, p, h, tricube);
    const oracle::LpSolution lp = oracle::l1_vertex_descent(X, y, w, tau);
    o.require(lp.optimal, "LP reference reached optimality");
    const double ours = oracle::check_loss(X, y, w, tau, fit.coeffs);
    lp_rel = std::max(lp_rel, std::abs(ours - lp.objective) / std::abs(lp.objective));
  }
  o.detail << " lp_rel=" << lp_rel;
  o.require(lp_rel <= 1e-6, "quantile objective against the LP reference");

  const DgpConfig truth;
  const Eigen::VectorXd u = default_integration_grid();
  const Eigen::VectorXd dq = true_effects(EffectKind::quantile, u, truth);
  const Eigen::VectorXd dd = true_effects(EffectKind::distributional, u, truth);
  const Eigen::VectorXd yq = true_conditional_quantiles(u, truth);
  double link = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j)
    link = std::max(link, std::abs(dq[j] * true_conditional_density(yq[j], truth) + dd[j]));
  o.detail << " link_err=" << link;
  o.require(link < 1e-12, "quantile times density equals minus distributional");
  report(4, "oracle agreement", o);
}

//! Simulated process moments against their limits, bandwidth 0.02.
void
criterion_five()
{
  DgpConfig dgp;
  dgp.n = 50000;
  dgp.seed = 7;
  const Sample s = generate_dgp(dgp);
  const double h = 0.02;
  const double gap = 2.0;
  const double fx = oracle::PotentialOutcomeLaw::phi(0.0) / dgp.sigma_x;
  const double sigma_tilde = dgp.sigma_tilde();
  const double factor = variance_factor(kernel_constants(tricube, 2, { 3 }));
  Outcome o;

  AnalysisOptions opts;
  opts.design = dgp_design();
  opts.fixed_bandwidth = h;
  opts.boot = 2000;
  opts.bands = false;
  opts.seed = 7;
  const AnalysisResult r = analyze(s, opts);
  const double se = r.effects[0].curve.se[0];
  const double var_sim = se * se * static_cast<double>(dgp.n) * h * h * h;
  const double var_limit = factor * sigma_tilde * sigma_tilde / (gap * gap * fx);
  o.detail << " multiplier_variance=" << var_sim << " limit=" << var_limit
           << " ratio=" << var_sim / var_limit;
  o.require(std::abs(var_sim / var_limit - 1.0) <= 0.05, "multiplier variance within 5%");

  Eigen::VectorXd tau(2);
  tau << 0.25, 0.75;
  const Eigen::VectorXd yq = true_conditional_quantiles(tau, dgp);
  Eigen::VectorXd f(2);
  f << true_conditional_density(yq[0], dgp), true_conditional_density(yq[1], dgp);
  const BootstrapEnsemble ens =
    pivotal_draws(s.x, dgp_design(), tau, Eigen::VectorXd::Constant(2, h), fx, f, 2,
                  tricube, 20000, 7);
  const Eigen::MatrixXd centered = ens.draws.rowwise() - ens.draws.colwise().mean();
  const double cov_sim =
    centered.col(0).dot(centered.col(1)) / static_cast<double>(ens.replications() - 1);
  const double cov_limit =
    (std::min(tau[0], tau[1]) - tau[0] * tau[1]) * factor / (gap * gap * fx * f[0] * f[1]);
  o.detail << " pivotal_cov=" << cov_sim << " limit=" << cov_limit
           << " ratio=" << cov_sim / cov_limit;
  o.require(std::abs(cov_sim / cov_limit - 1.0) <= 0.10, "pivotal covariance within 10%");
  report(5, "simulated process moments", o);
}

//! Structural properties of the estimators and the study driver.
void
criterion_six()
{
  Outcome o;
  DgpConfig dgp;
  dgp.n = 3000;
  dgp.seed = 11;
  const Sample s = generate_dgp(dgp);

  AnalysisOptions base;
  base.design = dgp_design();
  base.effects = { EffectKind::mean, EffectKind::quantile };
  base.boot = 0;
  base.fixed_bandwidth = 0.15;
  const AnalysisResult ref = analyze(s, base);

  // scale equivariance
  Sample scaled = s;
  const double c = 3.7;
  scaled.y *= c;
  const AnalysisResult sr = analyze(scaled, base);
  const double mean_rel = std::abs(sr.effects[0].curve.estimates[0] -
                                   c * ref.effects[0].curve.estimates[0]) /
                          std::abs(c * ref.effects[0].curve.estimates[0]);
  const double q_rel = max_abs(sr.effects[1].curve.estimates -
                               c * ref.effects[1].curve.estimates) /
                       (c * max_abs(ref.effects[1].curve.estimates));
  o.detail << " scale_mean_rel=" << mean_rel << " scale_quantile_rel=" << q_rel;
  o.require(mean_rel < 1e-12 && q_rel < 1e-6, "scale equivariance");

  // swapping the two rule slopes negates the effects
  AnalysisOptions swapped = base;
  swapped.effects = { EffectKind::mean, EffectKind::distributional };
  std::swap(swapped.design.slope_left, swapped.design.slope_right);
  AnalysisOptions unswapped = swapped;
  unswapped.design = base.design;
  unswapped.y_grid = true_conditional_quantiles(default_reporting_grid(), dgp);
  swapped.y_grid = unswapped.y_grid;
  const AnalysisResult a = analyze(s, unswapped);
  const AnalysisResult b = analyze(s, swapped);
  bool negated = true;
  for (std::size_t e = 0; e < 2; ++e)
    negated = negated && (a.effects[e].curve.estimates + b.effects[e].curve.estimates)
                             .cwiseAbs()
                             .maxCoeff() == 0.0;
  o.require(negated, "slope swap negates mean and distributional effects");

  // rearranged conditional quantiles are nondecreasing
  const Eigen::VectorXd& yt = ref.effects[1].curve.y_tau;
  bool monotone = yt.size() == 9;
  for (Eigen::Index j = 1; j < yt.size(); ++j)
    monotone = monotone && yt[j] >= yt[j - 1];
  Eigen::VectorXd t(5), v(5);
  t << 0.1, 0.3, 0.5, 0.7, 0.9;
  v << 2.0, -1.0, 0.5, 4.0, 3.0;
  const Eigen::VectorXd rv = rearrange_monotone(t, v);
  for (Eigen::Index j = 1; j < rv.size(); ++j)
    monotone = monotone && rv[j] >= rv[j - 1];
  o.require(monotone, "rearranged quantiles are monotone");

  // band width shrinks as the level grows
  AnalysisOptions banded = base;
  banded.fixed_bandwidth.reset();
  banded.boot = 500;
  Eigen::VectorXd last;
  bool shrinking = true;
  for (double level : { 0.01, 0.05, 0.1, 0.2 }) {
    banded.level = level;
    const AnalysisResult br = analyze(s, banded);
    Eigen::VectorXd width(10);
    width << br.effects[0].curve.band_hi - br.effects[0].curve.band_lo,
      br.effects[1].curve.band_hi - br.effects[1].curve.band_lo;
    if (last.size() > 0)
      shrinking = shrinking && (width.array() <= last.array()).all();
    last = width;
  }
  o.require(shrinking, "band width monotone in the level");

  // the study is bit-identical with one and eight workers
  StudyConfig study;
  study.effects = { EffectKind::mean, EffectKind::quantile };
  study.n_list = { 1000 };
  study.reps = 40;
  study.boot = 100;
  study.workers = 1;
  const StudyReport one = run_study(study);
  study.workers = 8;
  const StudyReport eight = run_study(study);
  bool identical = true;
  for (std::size_t k = 0; k < one.summaries.size(); ++k) {
    const EffectSummary& x = one.summaries[k];
    const EffectSummary& y = eight.summaries[k];
    identical = identical && (x.mean_estimate.array() == y.mean_estimate.array()).all() &&
                (x.rmse.array() == y.rmse.array()).all() &&
                (x.mean_bandwidth.array() == y.mean_bandwidth.array()).all() &&
                x.uniform_coverage == y.uniform_coverage && x.failures == y.failures;
  }
  o.require(identical, "study identical across worker counts");
  report(6, "structural properties", o);
}

} // namespace

int
main()
{
  const auto guarded = [](int id, const char* name, void (*run)()) {
    try {
      run();
    } catch (const std::exception& e) {
      Outcome o;
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
      report(id, name, o);
    }
  };
  guarded(4, "oracle agreement", criterion_four);
  guarded(6, "structural properties", criterion_six);
  guarded(5, "simulated process moments", criterion_five);
  guarded(1, "mean and median studies", criteria_one_and_two);
  guarded(3, "rmse decreases in n", criterion_three);
  return failures == 0 ? 0 : 1;
}
