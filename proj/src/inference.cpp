#include "rkd/inference.hpp"

#include "rkd/errors.hpp"
#include "rkd/parallel.hpp"
#include "rkd/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rkd {

std::string
to_string(EnsembleKind kind)
{
  switch (kind) {
    case EnsembleKind::multiplier:
      return "multiplier";
    case EnsembleKind::pivotal:
      return "pivotal";
    case EnsembleKind::lorenz_composite:
      return "lorenz_composite";
  }
  return "unknown";
}

std::string
to_string(TestKind kind)
{
  return kind == TestKind::significance ? "significance" : "homogeneity";
}

std::string
to_string(InfluenceScaling scaling)
{
  return scaling == InfluenceScaling::sample_gram ? "sample_gram" : "asymptotic";
}

InfluenceScaling
influence_scaling_from_name(const std::string& name)
{
  if (name == "sample_gram")
    return InfluenceScaling::sample_gram;
  if (name == "asymptotic")
    return InfluenceScaling::asymptotic;
  throw ConfigError("unknown influence scaling '" + name + "'");
}

Eigen::VectorXd
influence_weights(const Eigen::VectorXd& x, double x0, int p, double h,
                  const KernelSpec& kernel, double gap, double fx,
                  InfluenceScaling scaling)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("influence_weights: bandwidth must be positive");
  const Eigen::Index k = basis_size(p);
  const double nh = static_cast<double>(x.size()) * h;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
  s[1] = 1.0;
  s[2] = -1.0;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.size());
  Eigen::MatrixXd basis(k, x.size());
  Eigen::VectorXd kv = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = (x[i] - x0) / h;
    if (std::abs(u) > 1.0)
      continue;
    kv[i] = kernel(u);
    fill_basis(p, u, basis.col(i).data());
  }

  Eigen::VectorXd a;
  if (scaling == InfluenceScaling::asymptotic) {
    if (!(fx > 0.0))
      throw std::invalid_argument("influence_weights: density of the running "
                                  "variable must be positive");
    a = cached_constants(kernel, p)->gamma_inv.transpose() * s / fx;
  } else {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (kv[i] != 0.0)
        J.selfadjointView<Eigen::Lower>().rankUpdate(basis.col(i), kv[i]);
    }
    J = J.selfadjointView<Eigen::Lower>();
    J /= nh;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12))
      throw IllConditionedError("influence_weights: local design matrix is "
                                "singular");
    a = ldlt.solve(s);
  }
  const double scale = 1.0 / (gap * std::sqrt(nh));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (kv[i] != 0.0)
      w[i] = a.dot(basis.col(i)) * kv[i] * scale;
  }
  return w;
}

namespace {

void
check_replications(int B, std::vector<std::string>& warnings)
{
  if (B < 2)
    throw std::invalid_argument("at least two bootstrap draws are required");
  if (B < 100) {
    std::ostringstream msg;
    msg << "only " << B
        << " bootstrap draws; critical values will be unstable (use >= 100)";
    warnings.push_back(msg.str());
  }
}

// Observations with a nonzero weight at some grid point, and the compacted
// weight matrix restricted to them (support x grid).
struct SupportWeights
{
  std::vector<Eigen::Index> index;
  Eigen::MatrixXd w;
};

SupportWeights
compact(const Eigen::MatrixXd& full)
{
  SupportWeights out;
  for (Eigen::Index i = 0; i < full.rows(); ++i) {
    if ((full.row(i).array() != 0.0).any())
      out.index.push_back(i);
  }
  out.w.resize(static_cast<Eigen::Index>(out.index.size()), full.cols());
  for (std::size_t r = 0; r < out.index.size(); ++r)
    out.w.row(static_cast<Eigen::Index>(r)) = full.row(out.index[r]);
  return out;
}

void
check_grid_inputs(const Eigen::VectorXd& grid, const Eigen::VectorXd& h)
{
  if (grid.size() == 0)
    throw std::invalid_argument("ensemble grid is empty");
  if (h.size() != grid.size())
    throw std::invalid_argument("one bandwidth per grid point is required");
}

void
check_pairing(const EffectCurve& curve, const BootstrapEnsemble& ens)
{
  if (curve.grid.size() != ens.grid.size() ||
      curve.estimates.size() != ens.grid.size() ||
      ens.draws.cols() != ens.grid.size())
    throw std::invalid_argument("curve and ensemble grids differ in size");
  for (Eigen::Index j = 0; j < ens.grid.size(); ++j) {
    if (std::abs(curve.grid[j] - ens.grid[j]) >
        1e-12 * (1.0 + std::abs(ens.grid[j])))
      throw std::invalid_argument("curve and ensemble grids differ");
  }
  if (ens.bandwidths.size() != ens.grid.size() || ens.n <= 0)
    throw std::invalid_argument("ensemble lacks its normalizing bandwidths");
  if (ens.draws.rows() < 1)
    throw std::invalid_argument("ensemble has no draws");
}

Eigen::VectorXd
root_nh3(const BootstrapEnsemble& ens)
{
  return (static_cast<double>(ens.n) * ens.bandwidths.array().cube()).sqrt();
}

// Trapezoid weights that average a function over the span of `axis`.
Eigen::VectorXd
trapezoid_average_weights(const Eigen::VectorXd& axis)
{
  const Eigen::Index g = axis.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(g);
  if (g == 1) {
    w[0] = 1.0;
    return w;
  }
  const double span = axis[g - 1] - axis[0];
  if (!(span > 0.0))
    throw std::invalid_argument("averaging axis must be increasing");
  for (Eigen::Index j = 0; j + 1 < g; ++j) {
    const double d = 0.5 * (axis[j + 1] - axis[j]) / span;
    w[j] += d;
    w[j + 1] += d;
  }
  return w;
}

TestResult
finish_test(TestKind kind, double statistic, const std::vector<double>& sups,
            double level)
{
  TestResult out;
  out.kind = kind;
  out.level = level;
  out.statistic = statistic;
  out.critical_value = upper_quantile_higher(sups, level);
  const auto count = std::count_if(sups.begin(), sups.end(),
                                   [&](double s) { return s >= statistic; });
  out.p_value = static_cast<double>(count) / static_cast<double>(sups.size());
  out.reject = statistic > out.critical_value;
  return out;
}

void
check_level(double level)
{
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("significance level must lie in (0, 1)");
}

} // namespace

BootstrapEnsemble
multiplier_draws(const Eigen::VectorXd& x, const KinkDesign& design,
                 const Eigen::VectorXd& grid,
                 const std::vector<Eigen::VectorXd>& residuals,
                 const Eigen::VectorXd& bandwidths, double fx, int p,
                 const KernelSpec& kernel, int B, std::uint64_t seed,
                 InfluenceScaling scaling)
{
  design.validate();
  check_grid_inputs(grid, bandwidths);
  if (static_cast<Eigen::Index>(residuals.size()) != grid.size())
    throw std::invalid_argument("one residual vector per grid point is required");
  if (!(fx > 0.0))
    throw std::invalid_argument("multiplier_draws: f_X(x0) must be positive");
  BootstrapEnsemble ens;
  ens.kind = EnsembleKind::multiplier;
  ens.grid = grid;
  ens.bandwidths = bandwidths;
  ens.n = x.size();
  ens.master_seed = seed;
  check_replications(B, ens.warnings);

  const Eigen::Index g = grid.size();
  Eigen::MatrixXd full(x.size(), g);
  for (Eigen::Index j = 0; j < g; ++j) {
    if (residuals[static_cast<std::size_t>(j)].size() != x.size())
      throw std::invalid_argument("residual vector has the wrong length");
    full.col(j) = influence_weights(x, design.x0, p, bandwidths[j], kernel,
                                    design.gap(), fx, scaling)
                    .cwiseProduct(residuals[static_cast<std::size_t>(j)]);
  }
  const SupportWeights sw = compact(full);
  const auto m = static_cast<Eigen::Index>(sw.index.size());

  ens.draws.resize(B, g);
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    CounterRng rng = CounterRng::stream(seed, streams::multiplier, b);
    Eigen::VectorXd xi(m);
    for (Eigen::Index i = 0; i < m; ++i)
      xi[i] = rng.normal();
    ens.draws.row(static_cast<Eigen::Index>(b)) = xi.transpose() * sw.w;
  });
  return ens;
}

BootstrapEnsemble
multiplier_draws(const Sample& sample, const KinkDesign& design,
                 const EffectCurve& curve, double fx, int p,
                 const KernelSpec& kernel, int B, std::uint64_t seed,
                 InfluenceScaling scaling)
{
  if (curve.kind != EffectKind::mean && curve.kind != EffectKind::distributional)
    throw std::invalid_argument("multiplier draws need a mean or "
                                "distributional curve");
  if (static_cast<Eigen::Index>(curve.fits.size()) != curve.size())
    throw std::invalid_argument("curve carries no fits");
  std::vector<Eigen::VectorXd> res(curve.fits.size());
  for (std::size_t j = 0; j < res.size(); ++j) {
    if (curve.kind == EffectKind::mean) {
      res[j] = residuals(curve.fits[j], sample.y, sample.x);
    } else {
      const double t = curve.grid[static_cast<Eigen::Index>(j)];
      const Eigen::VectorXd z = (sample.y.array() <= t).cast<double>();
      res[j] = residuals(curve.fits[j], z, sample.x);
    }
  }
  return multiplier_draws(sample.x, design, curve.grid, res, curve.bandwidths,
                          fx, p, kernel, B, seed, scaling);
}

BootstrapEnsemble
pivotal_draws(const Eigen::VectorXd& x, const KinkDesign& design,
              const Eigen::VectorXd& tau_grid, const Eigen::VectorXd& bandwidths,
              double fx, const Eigen::VectorXd& fyx_at_quantiles, int p,
              const KernelSpec& kernel, int B, std::uint64_t seed,
              InfluenceScaling scaling)
{
  design.validate();
  check_grid_inputs(tau_grid, bandwidths);
  validate_level_grid(tau_grid, "quantile grid");
  if (fyx_at_quantiles.size() != tau_grid.size())
    throw std::invalid_argument("one conditional density per level is required");
  for (Eigen::Index j = 0; j < tau_grid.size(); ++j) {
    if (!(fyx_at_quantiles[j] > 0.0)) {
      std::ostringstream msg;
      msg << "conditional density at the estimated quantile for tau = "
          << tau_grid[j] << " is " << fyx_at_quantiles[j];
      throw PivotalDensityError(msg.str(), tau_grid[j]);
    }
  }
  if (!(fx > 0.0))
    throw std::invalid_argument("pivotal_draws: f_X(x0) must be positive");
  BootstrapEnsemble ens;
  ens.kind = EnsembleKind::pivotal;
  ens.grid = tau_grid;
  ens.bandwidths = bandwidths;
  ens.n = x.size();
  ens.master_seed = seed;
  check_replications(B, ens.warnings);

  const Eigen::Index g = tau_grid.size();
  Eigen::MatrixXd full(x.size(), g);
  for (Eigen::Index j = 0; j < g; ++j)
    full.col(j) = influence_weights(x, design.x0, p, bandwidths[j], kernel,
                                    design.gap(), fx, scaling) /
                  fyx_at_quantiles[j];
  const SupportWeights sw = compact(full);
  const auto m = static_cast<Eigen::Index>(sw.index.size());

  ens.draws.resize(B, g);
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    CounterRng rng = CounterRng::stream(seed, streams::pivotal, b);
    Eigen::VectorXd uni(m);
    for (Eigen::Index i = 0; i < m; ++i)
      uni[i] = rng.uniform();
    for (Eigen::Index j = 0; j < g; ++j) {
      const double t = tau_grid[j];
      double acc = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double wij = sw.w(i, j);
        if (wij != 0.0)
          acc += wij * (t - (uni[i] <= t ? 1.0 : 0.0));
      }
      ens.draws(static_cast<Eigen::Index>(b), j) = acc;
    }
  });
  return ens;
}

BootstrapEnsemble
lorenz_composite_draws(const BootstrapEnsemble& multiplier,
                       const BootstrapEnsemble& pivotal, double mu0,
                       const Eigen::VectorXd& lorenz_baseline,
                       const Eigen::VectorXd& tau_grid,
                       const Eigen::VectorXd& lorenz_bandwidths, bool rescale)
{
  if (multiplier.draws.rows() != pivotal.draws.rows())
    throw std::invalid_argument("ensembles differ in the number of draws");
  if (multiplier.draws.cols() != 1 || multiplier.bandwidths.size() != 1)
    throw std::invalid_argument("the mean ensemble must have a single point");
  if (pivotal.draws.cols() != pivotal.grid.size() ||
      pivotal.bandwidths.size() != pivotal.grid.size())
    throw std::invalid_argument("quantile ensemble is malformed");
  if (lorenz_baseline.size() != tau_grid.size() ||
      lorenz_bandwidths.size() != tau_grid.size())
    throw std::invalid_argument("Lorenz baseline and bandwidths must match the "
                                "reporting grid");
  if (!(mu0 > 0.0)) {
    std::ostringstream msg;
    msg << "baseline mean at the kink is " << mu0
        << "; the Lorenz curve requires a positive mean";
    throw NonpositiveMeanError(msg.str());
  }
  if (multiplier.n != pivotal.n)
    throw std::invalid_argument("ensembles come from different samples");

  BootstrapEnsemble ens;
  ens.kind = EnsembleKind::lorenz_composite;
  ens.grid = tau_grid;
  ens.bandwidths = lorenz_bandwidths;
  ens.n = pivotal.n;
  ens.master_seed = multiplier.master_seed;
  ens.warnings = multiplier.warnings;

  const Eigen::Index B = pivotal.draws.rows();
  const Eigen::Index g = tau_grid.size();
  Eigen::VectorXd c_mu = Eigen::VectorXd::Ones(g);
  Eigen::VectorXd c_l = Eigen::VectorXd::Ones(g);
  Eigen::VectorXd inv_u = Eigen::VectorXd::Ones(pivotal.grid.size());
  if (rescale) {
    c_l = lorenz_bandwidths.array().pow(1.5);
    c_mu = c_l / std::pow(multiplier.bandwidths[0], 1.5);
    inv_u = pivotal.bandwidths.array().pow(-1.5);
  }
  ens.draws.resize(B, g);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::VectorXd gq =
      pivotal.draws.row(b).transpose().cwiseProduct(inv_u);
    const Eigen::VectorXd iq = integrate_from_zero(pivotal.grid, gq, tau_grid);
    const double gm = multiplier.draws(b, 0);
    for (Eigen::Index j = 0; j < g; ++j)
      ens.draws(b, j) =
        (c_l[j] * iq[j] - lorenz_baseline[j] * c_mu[j] * gm) / mu0;
  }
  return ens;
}

double
upper_quantile_higher(std::vector<double> values, double level)
{
  if (values.empty())
    throw std::invalid_argument("no values to take a quantile of");
  check_level(level);
  std::sort(values.begin(), values.end());
  const double B = static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - level) * B - 1e-9));
  k = std::clamp<std::size_t>(k, 1, values.size());
  return values[k - 1];
}

TestResult
significance_test(const EffectCurve& curve, const BootstrapEnsemble& ens,
                  double level)
{
  check_level(level);
  check_pairing(curve, ens);
  const Eigen::VectorXd scale = root_nh3(ens);
  const double stat = (scale.cwiseProduct(curve.estimates)).cwiseAbs().maxCoeff();
  std::vector<double> sups(static_cast<std::size_t>(ens.draws.rows()));
  for (Eigen::Index b = 0; b < ens.draws.rows(); ++b)
    sups[static_cast<std::size_t>(b)] = ens.draws.row(b).cwiseAbs().maxCoeff();
  return finish_test(TestKind::significance, stat, sups, level);
}

TestResult
homogeneity_test(const EffectCurve& curve, const BootstrapEnsemble& ens,
                 double level)
{
  check_level(level);
  check_pairing(curve, ens);
  const Eigen::VectorXd scale = root_nh3(ens);
  const Eigen::VectorXd avg_w = trapezoid_average_weights(curve.averaging_axis());
  const double avg = avg_w.dot(curve.estimates);
  const double stat =
    (scale.array() * (curve.estimates.array() - avg)).abs().maxCoeff();
  std::vector<double> sups(static_cast<std::size_t>(ens.draws.rows()));
  for (Eigen::Index b = 0; b < ens.draws.rows(); ++b) {
    // back to the estimate scale, center, and renormalize pointwise
    const Eigen::VectorXd d = ens.draws.row(b).transpose().cwiseQuotient(scale);
    const double center = avg_w.dot(d);
    sups[static_cast<std::size_t>(b)] =
      (scale.array() * (d.array() - center)).abs().maxCoeff();
  }
  return finish_test(TestKind::homogeneity, stat, sups, level);
}

EffectCurve
uniform_band(const EffectCurve& curve, const BootstrapEnsemble& ens,
             double level)
{
  check_level(level);
  check_pairing(curve, ens);
  std::vector<double> sups(static_cast<std::size_t>(ens.draws.rows()));
  for (Eigen::Index b = 0; b < ens.draws.rows(); ++b)
    sups[static_cast<std::size_t>(b)] = ens.draws.row(b).cwiseAbs().maxCoeff();
  const double c = upper_quantile_higher(sups, level);
  const Eigen::VectorXd half = c * root_nh3(ens).cwiseInverse();
  EffectCurve out = curve;
  out.band_lo = curve.estimates - half;
  out.band_hi = curve.estimates + half;
  return out;
}

Eigen::VectorXd
pointwise_se(const BootstrapEnsemble& ens)
{
  if (ens.draws.rows() < 2)
    throw std::invalid_argument("pointwise_se: at least two draws are required");
  if (ens.bandwidths.size() != ens.draws.cols() || ens.n <= 0)
    throw std::invalid_argument("ensemble lacks its normalizing bandwidths");
  const double B = static_cast<double>(ens.draws.rows());
  const Eigen::RowVectorXd mean = ens.draws.colwise().mean();
  const Eigen::VectorXd var =
    ((ens.draws.rowwise() - mean).array().square().colwise().sum() / (B - 1.0))
      .transpose();
  return var.cwiseSqrt().cwiseQuotient(root_nh3(ens));
}

} // namespace rkd
