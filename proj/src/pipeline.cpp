#include "rkd/pipeline.hpp"

#include "rkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rkd {

void
AnalysisOptions::validate() const
{
  design.validate();
  if (effects.empty())
    throw ConfigError("at least one effect is required");
  if (p < 1 || q <= p)
    throw ConfigError("orders must satisfy 1 <= p < q");
  if (boot != 0 && boot < 2)
    throw ConfigError("bootstrap draws must be 0 (off) or at least 2");
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("significance level must lie in (0, 1)");
  if (fixed_bandwidth &&
      !(*fixed_bandwidth > 0.0 && std::isfinite(*fixed_bandwidth)))
    throw ConfigError("fixed bandwidth must be positive and finite");
  validate_level_grid(tau_grid, "reporting grid");
  validate_level_grid(integration_grid, "integration grid");
  for (Eigen::Index j = 1; j < y_grid.size(); ++j) {
    if (!(y_grid[j] > y_grid[j - 1]))
      throw ConfigError("outcome grid must be strictly increasing");
  }
}

namespace {

// Lazily computed pieces shared between the effects of one sample.
class Analysis
{
public:
  Analysis(const Sample& sample, const AnalysisOptions& opts)
    : opts_(opts)
    , sample_(sample)
  {
    wants_lorenz_ = std::find(opts.effects.begin(), opts.effects.end(),
                              EffectKind::lorenz) != opts.effects.end();
  }

  bool plugin() const { return !opts_.fixed_bandwidth.has_value(); }

  double fx()
  {
    if (!fx_)
      fx_ = kde_at(sample_.x, opts_.design.x0, opts_.kernel,
                   rule_of_thumb_vn(sample_.x));
    return *fx_;
  }

  const std::optional<ConditionalBandwidths>& density_bandwidths() const
  {
    return density_h_;
  }

  BandwidthSchedule schedule(EffectKind kind)
  {
    switch (kind) {
      case EffectKind::mean:
        return mean_schedule();
      case EffectKind::quantile:
        return quantile_schedule();
      case EffectKind::distributional:
        return distributional_schedule();
      case EffectKind::lorenz:
        return lorenz_schedule().lorenz;
    }
    throw ConfigError("unknown effect kind");
  }

  EffectResult run(EffectKind kind)
  {
    EffectResult r;
    r.kind = kind;
    switch (kind) {
      case EffectKind::mean:
        run_mean(r);
        break;
      case EffectKind::quantile:
        run_quantile(r);
        break;
      case EffectKind::distributional:
        run_distributional(r);
        break;
      case EffectKind::lorenz:
        run_lorenz(r);
        break;
    }
    return r;
  }

private:
  bool inference() const { return opts_.boot > 0; }

  const ConditionalBandwidths& density_h()
  {
    if (!density_h_) {
      if (plugin() && lorenz_) {
        density_h_ = ConditionalBandwidths{ lorenz_->quantile.density_h1,
                                            lorenz_->quantile.density_h2,
                                            lorenz_->quantile.density_c };
      } else if (plugin() && quantile_schedule_) {
        density_h_ = ConditionalBandwidths{ quantile_schedule_->density_h1,
                                            quantile_schedule_->density_h2,
                                            quantile_schedule_->density_c };
      } else {
        density_h_ = reference_rule_bandwidths(
          sample_.y, sample_.x, opts_.kernel,
          opts_.quantile_selector.bh_constant, opts_.quantile_selector.bh_b,
          &notes_);
      }
    }
    return *density_h_;
  }

  Eigen::VectorXd densities_at(const Eigen::VectorXd& y)
  {
    const auto& h = density_h();
    Eigen::VectorXd f(y.size());
    for (Eigen::Index j = 0; j < y.size(); ++j)
      f[j] = conditional_density(y[j], opts_.design.x0, sample_.y, sample_.x,
                                 opts_.kernel, h.h1, h.h2);
    return f;
  }

  const BandwidthSchedule& mean_schedule()
  {
    if (!mean_schedule_) {
      if (lorenz_)
        mean_schedule_ = lorenz_->mean;
      else
        mean_schedule_ = algorithm1_bandwidths(
          sample_, opts_.design.x0, Eigen::VectorXd::Zero(1),
          OutcomeTransform::identity, opts_.p, opts_.q, opts_.kernel);
    }
    return *mean_schedule_;
  }

  const LorenzBandwidthSchedule& lorenz_schedule()
  {
    if (!lorenz_)
      lorenz_ = algorithm2_lorenz_bandwidths(
        sample_, opts_.design.x0, opts_.tau_grid, opts_.integration_grid,
        opts_.p, opts_.q, opts_.kernel, opts_.quantile_selector);
    return *lorenz_;
  }

  // The reporting-grid schedule, taken from the integration-grid schedule
  // when the Lorenz effect is requested and every level lies on that grid.
  const BandwidthSchedule& quantile_schedule()
  {
    if (quantile_schedule_)
      return *quantile_schedule_;
    const auto& tau = opts_.tau_grid;
    if (wants_lorenz_) {
      const BandwidthSchedule& full = lorenz_schedule().quantile;
      std::vector<Eigen::Index> pick;
      for (Eigen::Index j = 0; j < tau.size(); ++j) {
        for (Eigen::Index k = 0; k < full.grid.size(); ++k) {
          if (std::abs(full.grid[k] - tau[j]) <= 1e-12) {
            pick.push_back(k);
            break;
          }
        }
      }
      if (static_cast<Eigen::Index>(pick.size()) == tau.size()) {
        BandwidthSchedule s = full;
        s.grid = tau;
        s.pilot.resize(tau.size());
        s.main.resize(tau.size());
        s.components.clear();
        for (Eigen::Index j = 0; j < tau.size(); ++j) {
          const Eigen::Index k = pick[static_cast<std::size_t>(j)];
          s.pilot[j] = full.pilot[k];
          s.main[j] = full.main[k];
          s.components.push_back(full.components[static_cast<std::size_t>(k)]);
        }
        quantile_schedule_ = std::move(s);
        return *quantile_schedule_;
      }
    }
    quantile_schedule_ =
      qrkd_bandwidths(sample_, opts_.design.x0, tau, opts_.p, opts_.q,
                      opts_.kernel, opts_.quantile_selector);
    return *quantile_schedule_;
  }

  Eigen::VectorXd distributional_points()
  {
    if (opts_.y_grid.size() > 0)
      return opts_.y_grid;
    return quantile_curve().y_tau;
  }

  const BandwidthSchedule& distributional_schedule()
  {
    if (!distributional_schedule_)
      distributional_schedule_ = algorithm1_bandwidths(
        sample_, opts_.design.x0, distributional_points(),
        OutcomeTransform::indicator, opts_.p, opts_.q, opts_.kernel);
    return *distributional_schedule_;
  }

  Eigen::VectorXd fixed(Eigen::Index g) const
  {
    return Eigen::VectorXd::Constant(g, *opts_.fixed_bandwidth);
  }

  const EffectCurve& quantile_curve()
  {
    if (!quantile_curve_) {
      const Eigen::VectorXd h =
        plugin() ? quantile_schedule().main : fixed(opts_.tau_grid.size());
      quantile_curve_ =
        rkd_quantile(sample_, opts_.design, opts_.tau_grid, opts_.p, h,
                     opts_.kernel, opts_.quantile_selector.solver);
    }
    return *quantile_curve_;
  }

  void infer(EffectResult& r, const BootstrapEnsemble& ens)
  {
    r.ensemble_kind = ens.kind;
    r.warnings.insert(r.warnings.end(), ens.warnings.begin(),
                      ens.warnings.end());
    r.curve.se = pointwise_se(ens);
    if (opts_.bands) {
      const EffectCurve banded = uniform_band(r.curve, ens, opts_.level);
      r.curve.band_lo = banded.band_lo;
      r.curve.band_hi = banded.band_hi;
    }
    if (opts_.tests) {
      r.significance = significance_test(r.curve, ens, opts_.level);
      if (r.curve.size() > 1)
        r.homogeneity = homogeneity_test(r.curve, ens, opts_.level);
    }
  }

  void attach_schedule(EffectResult& r, const BandwidthSchedule& s)
  {
    r.schedule = s;
    const auto w = s.all_warnings();
    r.warnings.insert(r.warnings.end(), w.begin(), w.end());
  }

  void run_mean(EffectResult& r)
  {
    double h = 0.0;
    if (plugin()) {
      attach_schedule(r, mean_schedule());
      h = mean_schedule().main[0];
    } else {
      h = *opts_.fixed_bandwidth;
    }
    r.curve = rkd_mean(sample_, opts_.design, opts_.p, h, opts_.kernel);
    if (inference())
      infer(r, multiplier_draws(sample_, opts_.design, r.curve, fx(), opts_.p,
                                opts_.kernel, opts_.boot, opts_.seed,
                                opts_.influence_scaling));
  }

  void run_quantile(EffectResult& r)
  {
    r.curve = quantile_curve();
    if (plugin())
      attach_schedule(r, quantile_schedule());
    if (inference())
      infer(r, pivotal_draws(sample_.x, opts_.design, r.curve.grid,
                             r.curve.bandwidths, fx(),
                             densities_at(r.curve.y_tau), opts_.p,
                             opts_.kernel, opts_.boot, opts_.seed,
                             opts_.influence_scaling));
  }

  void run_distributional(EffectResult& r)
  {
    const Eigen::VectorXd points = distributional_points();
    Eigen::VectorXd h;
    if (plugin()) {
      attach_schedule(r, distributional_schedule());
      h = distributional_schedule().main;
    } else {
      h = fixed(points.size());
    }
    if (opts_.y_grid.size() > 0) {
      r.curve = rkd_distributional(sample_, opts_.design, points, opts_.p, h,
                                   opts_.kernel);
    } else {
      const DistributionalBuilder builder = [&](const Eigen::VectorXd& y) {
        return rkd_distributional(sample_, opts_.design, y, opts_.p, h,
                                  opts_.kernel);
      };
      r.curve = ldte_at_quantiles(builder, quantile_curve());
    }
    if (inference())
      infer(r, multiplier_draws(sample_, opts_.design, r.curve, fx(), opts_.p,
                                opts_.kernel, opts_.boot, opts_.seed,
                                opts_.influence_scaling));
  }

  void run_lorenz(EffectResult& r)
  {
    LorenzBandwidths bw;
    if (plugin()) {
      const auto& ls = lorenz_schedule();
      attach_schedule(r, ls.lorenz);
      bw = ls.bandwidths();
    } else {
      bw.quantile_h = fixed(opts_.integration_grid.size());
      bw.mean_h = *opts_.fixed_bandwidth;
      bw.lorenz_h = fixed(opts_.tau_grid.size());
    }
    const LorenzEstimate est =
      rkd_lorenz(sample_, opts_.design, opts_.tau_grid, opts_.integration_grid,
                 opts_.p, bw, opts_.kernel, opts_.quantile_selector.solver);
    r.curve = est.curve;
    if (!inference())
      return;
    const auto mult = multiplier_draws(sample_, opts_.design, est.mean_curve,
                                       fx(), opts_.p, opts_.kernel, opts_.boot,
                                       opts_.seed, opts_.influence_scaling);
    const auto& qc = est.quantile_curve;
    const auto piv = pivotal_draws(sample_.x, opts_.design, qc.grid,
                                   qc.bandwidths, fx(), densities_at(qc.y_tau),
                                   opts_.p, opts_.kernel, opts_.boot,
                                   opts_.seed, opts_.influence_scaling);
    infer(r, lorenz_composite_draws(mult, piv, est.curve.mu0, est.curve.lorenz,
                                    est.curve.grid, est.curve.bandwidths,
                                    opts_.lorenz_rescale));
  }

public:
  std::vector<std::string> notes_;

private:
  const AnalysisOptions& opts_;
  const Sample& sample_;
  bool wants_lorenz_ = false;
  std::optional<double> fx_;
  std::optional<ConditionalBandwidths> density_h_;
  std::optional<BandwidthSchedule> mean_schedule_;
  std::optional<BandwidthSchedule> quantile_schedule_;
  std::optional<BandwidthSchedule> distributional_schedule_;
  std::optional<LorenzBandwidthSchedule> lorenz_;
  std::optional<EffectCurve> quantile_curve_;
};

[[noreturn]] void
rethrow_for_effect(EffectKind kind)
{
  const std::string ctx = to_string(kind) + " effect: ";
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + e.what(), e.last_objective());
  } catch (const PivotalDensityError& e) {
    throw PivotalDensityError(ctx + e.what(), e.tau());
  } catch (const IdentificationError& e) {
    throw IdentificationError(ctx + e.what());
  } catch (const IllConditionedError& e) {
    throw IllConditionedError(ctx + e.what());
  } catch (const EmptyWindowError& e) {
    throw EmptyWindowError(ctx + e.what());
  } catch (const NonpositiveMeanError& e) {
    throw NonpositiveMeanError(ctx + e.what());
  } catch (const RkdError& e) {
    throw RkdError(ctx + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(ctx + e.what());
  }
}

} // namespace

AnalysisResult
analyze(const Sample& sample, const AnalysisOptions& options)
{
  options.validate();
  sample.validate();
  Analysis a(sample, options);
  AnalysisResult out;
  out.n = sample.size();
  for (const EffectKind kind : options.effects) {
    EffectResult r;
    r.kind = kind;
    try {
      r = a.run(kind);
      if (!r.curve.estimates.allFinite())
        throw RkdError("non-finite estimate");
    } catch (const std::exception& e) {
      if (!options.capture_errors)
        rethrow_for_effect(kind);
      r = EffectResult{};
      r.kind = kind;
      r.error = e.what();
    }
    out.effects.push_back(std::move(r));
  }
  if (options.boot > 0) {
    try {
      out.fx = a.fx();
    } catch (const std::exception&) {
      out.fx = std::nan("");
    }
  }
  out.density_bandwidths = a.density_bandwidths();
  out.warnings = a.notes_;
  return out;
}

std::vector<BandwidthSchedule>
select_bandwidths(const Sample& sample, const AnalysisOptions& options)
{
  options.validate();
  sample.validate();
  if (options.fixed_bandwidth)
    throw ConfigError("bandwidth selection is not available with a fixed "
                      "bandwidth");
  Analysis a(sample, options);
  std::vector<BandwidthSchedule> out;
  for (const EffectKind kind : options.effects) {
    try {
      out.push_back(a.schedule(kind));
    } catch (...) {
      rethrow_for_effect(kind);
    }
  }
  return out;
}

} // namespace rkd
