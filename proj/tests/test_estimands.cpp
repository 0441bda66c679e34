#include "oracles.hpp"
#include "rkd/density.hpp"
#include "rkd/errors.hpp"
#include "rkd/pipeline.hpp"
#include "rkd/simulation.hpp"

#include <doctest.h>

using namespace rkd;

namespace {

const KernelSpec tricube_k{ KernelType::tricube };

oracle::PotentialOutcomeLaw
design_law(const DgpConfig& cfg = {})
{
  return { cfg.sigma_eps * std::sqrt(1.0 - cfg.rho * cfg.rho) };
}

double
inverse_normal(double p)
{
  // bisection on the closed-form cdf; plenty for test oracles
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::PotentialOutcomeLaw::Phi(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Sample
kinked_sample(Eigen::Index n, bool noise)
{
  Sample s;
  s.x = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
  s.y.resize(n);
  std::mt19937_64 gen(17);
  std::normal_distribution<double> e(0.0, 0.1);
  for (Eigen::Index i = 0; i < n; ++i)
    s.y[i] = 1.0 + (s.x[i] >= 0.0 ? s.x[i] : 0.0) + (noise ? e(gen) : 0.0);
  return s;
}

Sample
design_sample(std::int64_t n, std::uint64_t seed)
{
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return generate_dgp(cfg);
}

AnalysisOptions
fixed_options(std::vector<EffectKind> effects, double h, int boot)
{
  AnalysisOptions o;
  o.design = dgp_design();
  o.effects = std::move(effects);
  o.fixed_bandwidth = h;
  o.boot = boot;
  o.bands = false;
  return o;
}

} // namespace

TEST_CASE("mean effect examples")
{
  const KinkDesign design{ 0.0, 1.0, -1.0 };
  const Sample s = kinked_sample(201, false);
  const EffectCurve c = rkd_mean(s, design, 2, 0.5, tricube_k);
  CHECK(c.estimates[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.mu0 == doctest::Approx(1.0).epsilon(1e-12));

  Sample flat = s;
  flat.y.setConstant(3.0);
  CHECK(std::abs(rkd_mean(flat, design, 2, 0.5, tricube_k).estimates[0]) < 1e-12);

  // simulation design at n = 4000 with plug-in bandwidths
  AnalysisOptions o;
  o.design = dgp_design();
  o.boot = 0;
  const AnalysisResult r = analyze(design_sample(4000, 101), o);
  CHECK(std::abs(r.effects[0].curve.estimates[0] - 0.5) < 3.0 * 0.061);
}

TEST_CASE("distributional effect examples")
{
  const KinkDesign design{ 0.0, 1.0, -1.0 };
  const Sample s = kinked_sample(201, true);
  Eigen::VectorXd ys(2);
  ys << s.y.minCoeff() - 1.0, s.y.maxCoeff() + 1.0;
  const EffectCurve c =
    rkd_distributional(s, design, ys, 2, Eigen::VectorXd::Constant(2, 0.5), tricube_k);
  CHECK(std::abs(c.estimates[0]) < 1e-12);
  CHECK(std::abs(c.estimates[1]) < 1e-12);

  // y = 1 on the simulation design, n = 1e5
  const oracle::PotentialOutcomeLaw law = design_law();
  const double truth = oracle::derivative_at_zero(
    [&](double b) { return law.cdf(1.0, b); }, 1e-5);
  CHECK(truth == doctest::Approx(-1.5906).epsilon(1e-4));
  AnalysisOptions o = fixed_options({ EffectKind::distributional }, 0.1, 200);
  o.y_grid = Eigen::VectorXd::Constant(1, 1.0);
  const AnalysisResult r = analyze(design_sample(100000, 102), o);
  const EffectCurve& d = r.effects[0].curve;
  CHECK(std::abs(d.estimates[0] - truth) < 4.0 * d.se[0]);
}

TEST_CASE("quantile effect examples")
{
  const KinkDesign design{ 0.0, 1.0, -1.0 };
  Sample s = kinked_sample(201, false);
  s.y.array() -= 1.0;
  Eigen::VectorXd taus(3);
  taus << 0.25, 0.5, 0.75;
  const EffectCurve c =
    rkd_quantile(s, design, taus, 2, Eigen::VectorXd::Constant(3, 0.5), tricube_k);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(c.estimates[j] == doctest::Approx(0.5).epsilon(1e-8));

  // tau = 0.5 at n = 4000 with plug-in bandwidths
  AnalysisOptions o;
  o.design = dgp_design();
  o.effects = { EffectKind::quantile };
  o.tau_grid = Eigen::VectorXd::Constant(1, 0.5);
  o.boot = 0;
  const AnalysisResult r = analyze(design_sample(4000, 103), o);
  CHECK(std::abs(r.effects[0].curve.estimates[0] - 0.5) < 3.0 * 0.086);

  // tau = 0.9 at large n
  const oracle::PotentialOutcomeLaw law = design_law();
  const double z = inverse_normal(0.9);
  const double truth = oracle::derivative_at_zero(
    [&](double b) { return law.quantile(0.9, b, z); }, 1e-5);
  CHECK(truth == doctest::Approx(0.8214).epsilon(1e-4));
  AnalysisOptions big = fixed_options({ EffectKind::quantile }, 0.1, 200);
  big.tau_grid = Eigen::VectorXd::Constant(1, 0.9);
  const AnalysisResult rb = analyze(design_sample(100000, 104), big);
  const EffectCurve& q = rb.effects[0].curve;
  CHECK(std::abs(q.estimates[0] - truth) < 4.0 * q.se[0]);
}

TEST_CASE("distributional effect at estimated quantiles")
{
  AnalysisOptions o =
    fixed_options({ EffectKind::quantile, EffectKind::distributional }, 0.1, 200);
  o.tau_grid = Eigen::VectorXd::Constant(1, 0.5);
  const AnalysisResult r = analyze(design_sample(100000, 105), o);
  const EffectCurve& q = r.effects[0].curve;
  const EffectCurve& d = r.effects[1].curve;
  CHECK((d.grid - q.y_tau).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.levels - q.grid).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(d.estimates[0] - (-1.5906)) < 4.0 * d.se[0] + 1e-4);

  // the link between the two effects: dQ f = -dF at the estimated quantile
  const Sample s = design_sample(100000, 105);
  const double f = conditional_density(q.y_tau[0], 0.0, s.y, s.x, tricube_k, 0.02, 0.02);
  const double lhs = q.estimates[0] * f + d.estimates[0];
  CHECK(std::abs(lhs) < 4.0 * std::hypot(q.se[0] * f, d.se[0]));

  // plumbing contract on arbitrary data
  const EffectCurve direct = ldte_at_quantiles(
    [&](const Eigen::VectorXd& pts) {
      return rkd_distributional(s, dgp_design(), pts, 2,
                                Eigen::VectorXd::Constant(pts.size(), 0.1), tricube_k);
    },
    q);
  CHECK((direct.grid - q.y_tau).cwiseAbs().maxCoeff() == 0.0);
  CHECK(direct.estimates[0] == d.estimates[0]);
}

TEST_CASE("analytic effects of the simulation design")
{
  const DgpConfig cfg;
  const oracle::PotentialOutcomeLaw law = design_law(cfg);
  const Eigen::VectorXd taus = default_reporting_grid();
  const Eigen::VectorXd dq = true_effects(EffectKind::quantile, taus, cfg);
  const Eigen::VectorXd dd = true_effects(EffectKind::distributional, taus, cfg);
  const Eigen::VectorXd dl = true_effects(EffectKind::lorenz, taus, cfg);
  const Eigen::VectorXd dm = true_effects(EffectKind::mean, taus, cfg);
  const Eigen::VectorXd yq = true_conditional_quantiles(taus, cfg);

  CHECK(dm.size() == 1);
  CHECK(dm[0] == doctest::Approx(oracle::derivative_at_zero(
                                   [&](double b) { return law.mean(b); }, 1e-4))
                   .epsilon(1e-9));
  for (Eigen::Index j = 0; j < taus.size(); ++j) {
    const double z = inverse_normal(taus[j]);
    const double h = 1e-5;
    const double q_fd =
      oracle::derivative_at_zero([&](double b) { return law.quantile(taus[j], b, z); }, h);
    const double y = 1.0 + law.sigma_tilde * z;
    const double f_fd = oracle::derivative_at_zero([&](double b) { return law.cdf(y, b); }, h);
    const double l_fd =
      oracle::derivative_at_zero([&](double b) { return law.lorenz(taus[j], b, z); }, h);
    CHECK(std::abs(dq[j] - q_fd) < 1e-6);
    CHECK(std::abs(dd[j] - f_fd) < 1e-6);
    CHECK(std::abs(dl[j] - l_fd) < 1e-6);
    CHECK(std::abs(yq[j] - y) < 1e-9);

    // second oracle: compose the analytic pieces, (1/mu)(int dQ - L dmu)
    const double int_dq = 0.5 * taus[j] - 2.0 * law.sigma_tilde * law.phi(z);
    const double L = taus[j] - law.sigma_tilde * law.phi(z);
    CHECK(std::abs(dl[j] - (int_dq - L * 0.5)) < 1e-9);
    CHECK(std::abs(dl[j] - (-1.5 * law.sigma_tilde * law.phi(z))) < 1e-12);

    // identification link, exactly on the analytic side
    const double fy = true_conditional_density(yq[j], cfg);
    CHECK(std::abs(dq[j] * fy + dd[j]) < 1e-12);
  }
  CHECK(dl[4] == doctest::Approx(-0.0750).epsilon(2e-3));
}

TEST_CASE("integration from zero and Lorenz composition")
{
  const Eigen::VectorXd u = default_integration_grid();
  Eigen::VectorXd tau(3);
  tau << 0.1, 0.555, 0.99;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(u.size());
  const Eigen::VectorXd i1 = integrate_from_zero(u, ones, tau);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(i1[j] == doctest::Approx(tau[j]).epsilon(1e-12));
  // f(u) = u: exact trapezoids plus the leading rectangle u1 * u1
  const Eigen::VectorXd iu = integrate_from_zero(u, u, tau);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(iu[j] == doctest::Approx(0.5 * tau[j] * tau[j] + 0.5 * 0.01 * 0.01).epsilon(1e-12));

  // transcription of (1/mu0)(int dq - L dmu), L = int y / mu0
  Eigen::VectorXd dq(u.size()), yu(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    dq[k] = 0.3 + std::sin(3.0 * u[k]);
    yu[k] = 1.0 + 2.0 * u[k] * u[k];
  }
  const double mu0 = 1.7, dmu = -0.4;
  const LorenzComposition comp = compose_lorenz(u, dq, yu, mu0, dmu, tau);
  const auto integral = [&](const Eigen::VectorXd& f, double t) {
    double s = 0.01 * f[0];
    for (Eigen::Index k = 1; k < u.size(); ++k) {
      const double a = u[k - 1], b = u[k];
      if (t <= a)
        break;
      const double top = std::min(t, b);
      const double ft = f[k - 1] + (f[k] - f[k - 1]) * (top - a) / (b - a);
      s += 0.5 * (f[k - 1] + ft) * (top - a);
    }
    return s;
  };
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double L = integral(yu, tau[j]) / mu0;
    CHECK(comp.lorenz[j] == doctest::Approx(L).epsilon(1e-12));
    CHECK(comp.effect[j] ==
          doctest::Approx((integral(dq, tau[j]) - L * dmu) / mu0).epsilon(1e-12));
  }
  // constant effect with a location shift
  const Eigen::VectorXd c_eff = Eigen::VectorXd::Constant(u.size(), 0.25);
  const LorenzComposition shift = compose_lorenz(u, c_eff, yu, mu0, 0.25, tau);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(shift.effect[j] ==
          doctest::Approx(0.25 / mu0 * (tau[j] - shift.lorenz[j])).epsilon(1e-12));
}

TEST_CASE("Lorenz effect")
{
  const Sample s = design_sample(20000, 106);
  const Eigen::VectorXd u = default_integration_grid();
  Eigen::VectorXd tau(3);
  tau << 1e-6, 0.5, 0.9;
  LorenzBandwidths bw;
  bw.quantile_h = Eigen::VectorXd::Constant(u.size(), 0.15);
  bw.mean_h = 0.15;
  bw.lorenz_h = Eigen::VectorXd::Constant(tau.size(), 0.15);
  LorenzBandwidths bw2 = bw;
  bw2.lorenz_h = Eigen::VectorXd::Constant(2, 0.15);
  const LorenzEstimate est = rkd_lorenz(s, dgp_design(), tau, u, 2, bw, tricube_k);
  CHECK(std::abs(est.curve.estimates[0]) < 1e-4);
  for (Eigen::Index j = 1; j < est.curve.lorenz.size(); ++j)
    CHECK(est.curve.lorenz[j] >= est.curve.lorenz[j - 1]);
  CHECK(est.curve.lorenz.minCoeff() >= 0.0);
  CHECK(est.curve.lorenz.maxCoeff() <= 1.0);

  AnalysisOptions o = fixed_options({ EffectKind::lorenz }, 0.15, 200);
  o.tau_grid = Eigen::VectorXd::Constant(1, 0.5);
  const AnalysisResult r = analyze(s, o);
  const EffectCurve& c = r.effects[0].curve;
  const double truth = -1.5 * design_law().sigma_tilde * oracle::PotentialOutcomeLaw::phi(0.0);
  CHECK(c.estimates[0] == doctest::Approx(est.curve.estimates[1]).epsilon(1e-12));
  CHECK(std::abs(c.estimates[0] - truth) < 4.0 * c.se[0]);

  // halving the integration step: analytic ingredients first, then estimates
  Eigen::VectorXd fine(197);
  for (Eigen::Index k = 0; k < fine.size(); ++k)
    fine[k] = 0.005 * static_cast<double>(k + 2);
  const Eigen::VectorXd t2 = tau.tail(2);
  const auto analytic = [&](const Eigen::VectorXd& g) {
    const oracle::PotentialOutcomeLaw law = design_law();
    Eigen::VectorXd dq(g.size()), yu(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double z = inverse_normal(g[k]);
      dq[k] = 0.5 + 2.0 * law.sigma_tilde * z;
      yu[k] = 1.0 + law.sigma_tilde * z;
    }
    return compose_lorenz(g, dq, yu, 1.0, 0.5, t2).effect;
  };
  CHECK((analytic(fine) - analytic(u)).cwiseAbs().maxCoeff() < 1e-3);

  const Sample large = design_sample(100000, 106);
  const LorenzEstimate coarse = rkd_lorenz(large, dgp_design(), t2, u, 2, bw2, tricube_k);
  LorenzBandwidths bw_fine = bw2;
  bw_fine.quantile_h = Eigen::VectorXd::Constant(fine.size(), 0.15);
  const LorenzEstimate refined =
    rkd_lorenz(large, dgp_design(), t2, fine, 2, bw_fine, tricube_k);
  CHECK((refined.curve.estimates - coarse.curve.estimates).cwiseAbs().maxCoeff() < 1e-3);

  Sample negative = s;
  negative.y.array() -= 10.0;
  CHECK_THROWS_AS(rkd_lorenz(negative, dgp_design(), tau, u, 2, bw, tricube_k),
                  NonpositiveMeanError);
}

TEST_CASE("scale equivariance and slope swap")
{
  const Sample s = design_sample(2000, 107);
  Sample scaled = s;
  scaled.y *= 3.0;
  const KinkDesign design = dgp_design();
  const KinkDesign swapped{ design.x0, design.slope_left, design.slope_right };
  Eigen::VectorXd taus(3);
  taus << 0.25, 0.5, 0.75;
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(3, 0.3);

  const double m = rkd_mean(s, design, 2, 0.3, tricube_k).estimates[0];
  CHECK(rkd_mean(scaled, design, 2, 0.3, tricube_k).estimates[0] ==
        doctest::Approx(3.0 * m).epsilon(1e-12));
  CHECK(rkd_mean(s, swapped, 2, 0.3, tricube_k).estimates[0] == -m);

  const EffectCurve q = rkd_quantile(s, design, taus, 2, h, tricube_k);
  const EffectCurve q3 = rkd_quantile(scaled, design, taus, 2, h, tricube_k);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(std::abs(q3.estimates[j] - 3.0 * q.estimates[j]) <= 1e-6 * std::abs(3.0 * q.estimates[j]) + 1e-9);

  Eigen::VectorXd ys(3);
  ys << 0.9, 1.0, 1.1;
  const EffectCurve d = rkd_distributional(s, design, ys, 2, h, tricube_k);
  const EffectCurve ds = rkd_distributional(s, swapped, ys, 2, h, tricube_k);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(ds.estimates[j] == -d.estimates[j]);

  CHECK_THROWS_AS(rkd_mean(s, KinkDesign{ 0.0, 1.0, 1.0 }, 2, 0.3, tricube_k),
                  std::invalid_argument);
}
