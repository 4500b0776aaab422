#pragma once

// Posterior summaries, sampling efficiency, DIC, clean-error prediction,
// the planted-outlier robustness sweep and the tail-index ratio probe.

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/gibbs.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"

namespace ehreg {

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw DomainError("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile: q must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double quantile(const Eigen::VectorXd& x, double q) {
  return quantile(std::vector<double>(x.data(), x.data() + x.size()), q);
}

/// Per-column posterior mean and equal-tailed interval.
struct PosteriorSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline constexpr Eigen::Index kMinSummaryDraws = 100;

inline PosteriorSummary summarize(const Eigen::MatrixXd& draws, double level = 0.95) {
  if (draws.rows() < kMinSummaryDraws) {
    throw DomainError("summarize: need at least " + std::to_string(kMinSummaryDraws) + " draws, got " +
                      std::to_string(draws.rows()));
  }
  const double tail = 0.5 * (1.0 - level);
  PosteriorSummary s;
  s.mean = draws.colwise().mean().transpose();
  s.lower.resize(draws.cols());
  s.upper.resize(draws.cols());
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    std::vector<double> col(draws.col(k).data(), draws.col(k).data() + draws.rows());
    std::sort(col.begin(), col.end());
    s.lower[k] = quantile(col, tail);
    s.upper[k] = quantile(col, 1.0 - tail);
  }
  return s;
}

inline Eigen::VectorXd summarize_mean(const Eigen::MatrixXd& draws) { return draws.colwise().mean().transpose(); }

// ---------------------------------------------------------------------------
// Inefficiency factor
// ---------------------------------------------------------------------------

inline constexpr Eigen::Index kMinTraceLength = 200;

/// 1 + 2 sum_k rho_k with Geyer's initial monotone sequence: autocorrelation
/// pairs Gamma_m = rho_{2m} + rho_{2m+1} are summed while positive, each
/// capped at its predecessor, giving IF = 2 sum Gamma_m - 1. Antithetic
/// chains can give values below 1; the estimate is floored at 0. A constant
/// trace has IF 1.
inline double inefficiency_factor(const Eigen::VectorXd& trace) {
  const Eigen::Index n = trace.size();
  if (n < kMinTraceLength) {
    throw DomainError("inefficiency_factor: need at least " + std::to_string(kMinTraceLength) + " draws");
  }
  const Eigen::VectorXd c = trace.array() - trace.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0) || c0 < 1e-300) return 1.0;
  auto rho = [&](Eigen::Index k) {
    return c.head(n - k).dot(c.tail(n - k)) / static_cast<double>(n) / c0;
  };
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double g = rho(2 * m) + rho(2 * m + 1);
    if (!(g > 0.0)) break;
    g = std::min(g, prev);
    sum += g;
    prev = g;
  }
  return std::max(0.0, 2.0 * sum - 1.0);
}

/// Monte Carlo standard error of a posterior mean: sd * sqrt(IF / N).
inline double mc_standard_error(const Eigen::VectorXd& trace) {
  const double n = static_cast<double>(trace.size());
  const Eigen::VectorXd c = trace.array() - trace.mean();
  const double var = c.squaredNorm() / n;
  return std::sqrt(var * std::max(inefficiency_factor(trace), 1.0) / n);
}

// ---------------------------------------------------------------------------
// Coefficient metrics across replications
// ---------------------------------------------------------------------------

/// One chain's contribution to RMSE / CP / AL / IF for each coefficient.
struct CoefficientFit {
  Eigen::VectorXd error;    // posterior mean - truth
  Eigen::VectorXd covered;  // 1 if truth inside the 95% interval
  Eigen::VectorXd length;   // interval length
  Eigen::VectorXd ifactor;  // inefficiency factor per coefficient
};

inline CoefficientFit coefficient_fit(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth) {
  if (draws.cols() != truth.size()) throw DomainError("coefficient_fit: truth length mismatch");
  const auto s = summarize(draws);
  CoefficientFit f;
  f.error = s.mean - truth;
  f.covered.resize(truth.size());
  f.ifactor.resize(truth.size());
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    f.covered[k] = (truth[k] >= s.lower[k] && truth[k] <= s.upper[k]) ? 1.0 : 0.0;
    f.ifactor[k] = inefficiency_factor(draws.col(k));
  }
  f.length = s.upper - s.lower;
  return f;
}

/// Metrics averaged over coefficients. Per coefficient, RMSE is taken over
/// replications before averaging. rmspe and dic are filled by the
/// experiments that compute them.
struct MetricReport {
  Eigen::VectorXd rmse_k, cp_k, al_k, if_k;
  double rmse = 0.0;
  double cp = 0.0;
  double al = 0.0;
  double if_avg = 0.0;
  std::optional<double> rmspe;
  std::optional<double> dic;
  int replications = 0;
};

inline MetricReport aggregate(const std::vector<CoefficientFit>& fits) {
  if (fits.empty()) throw DomainError("aggregate: no replications");
  const Eigen::Index p = fits.front().error.size();
  MetricReport r;
  r.rmse_k = Eigen::VectorXd::Zero(p);
  r.cp_k = Eigen::VectorXd::Zero(p);
  r.al_k = Eigen::VectorXd::Zero(p);
  r.if_k = Eigen::VectorXd::Zero(p);
  for (const auto& f : fits) {
    r.rmse_k += f.error.cwiseAbs2();
    r.cp_k += f.covered;
    r.al_k += f.length;
    r.if_k += f.ifactor;
  }
  const double m = static_cast<double>(fits.size());
  r.rmse_k = (r.rmse_k / m).cwiseSqrt();
  r.cp_k /= m;
  r.al_k /= m;
  r.if_k /= m;
  r.rmse = r.rmse_k.mean();
  r.cp = r.cp_k.mean();
  r.al = r.al_k.mean();
  r.if_avg = r.if_k.mean();
  r.replications = static_cast<int>(fits.size());
  return r;
}

/// sqrt(mean_j (estimate_j - truth_j)^2).
inline double rmspe(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size() || truth.size() == 0) throw DomainError("rmspe: size mismatch");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(truth.size()));
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// Predictive draws y* = alpha + x*' beta + sigma eps*, eps* ~ N(0, 1): the
/// sampling model of a new response given it is not an outlier (z* = 0).
struct Predictive {
  Eigen::MatrixXd draws;  // retained draws x new points
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline Predictive predict_clean(const ChainOutput& out, const Eigen::MatrixXd& x_new, RngStream& rng,
                                double level = 0.95) {
  const Eigen::MatrixXd& beta = out.at("beta");
  const Eigen::VectorXd sigma2 = out.scalar("sigma2");
  if (x_new.cols() != beta.cols()) throw DomainError("predict_clean: x_new has wrong column count");
  Predictive p;
  p.draws = beta * x_new.transpose();
  if (out.has("alpha")) p.draws.colwise() += out.scalar("alpha");
  for (Eigen::Index r = 0; r < p.draws.rows(); ++r) {
    const double sd = std::sqrt(sigma2[r]);
    for (Eigen::Index j = 0; j < p.draws.cols(); ++j) p.draws(r, j) += sd * rng.normal();
  }
  const auto s = summarize(p.draws, level);
  p.mean = s.mean;
  p.lower = s.lower;
  p.upper = s.upper;
  return p;
}

// ---------------------------------------------------------------------------
// Observed-data likelihood and DIC
// ---------------------------------------------------------------------------

/// log of the heavy EH component f1 tabulated against log(1 + |x|) and
/// interpolated by a cubic B-spline; direct quadrature outside the table.
class HeavyDensityTable {
 public:
  explicit HeavyDensityTable(double gamma, double zeta_max = 40.0, std::size_t nodes = 2401,
                             const QuadratureSpec& quad = {})
      : h_(gamma, 0.0, quad), quad_(quad), zeta_max_(zeta_max) {
    const double step = zeta_max / static_cast<double>(nodes - 1);
    std::vector<double> values(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double x = std::expm1(step * static_cast<double>(k));
      values[k] = std::log(heavy_component_density(x, h_, quad_));
    }
    spline_ = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(values.data(), nodes,
                                                                                             0.0, step);
  }

  double log_density(double x) const {
    const double zeta = std::log1p(std::abs(x));
    if (zeta >= zeta_max_) return std::log(heavy_component_density(x, h_, quad_));
    return (*spline_)(zeta);
  }

  double gamma() const { return h_.gamma(); }

 private:
  HParams h_;
  QuadratureSpec quad_;
  double zeta_max_;
  std::shared_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

/// One parameter configuration at which the observed-data likelihood is
/// evaluated: latent z and u are integrated out, random effects are
/// conditioned on.
struct ParameterPoint {
  Eigen::VectorXd beta;
  double alpha = 0.0;
  double sigma2 = 1.0;
  double s = 0.0;
  double gamma = 1.0;
  double nu = 3.0;
  Eigen::VectorXd effect;  // b (per group) or eta (per row); empty if none
};

namespace detail {

inline double log_sum(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

}  // namespace detail

/// Evaluates log p(y | theta) for a model, caching heavy-density tables per gamma.
class LikelihoodEvaluator {
 public:
  explicit LikelihoodEvaluator(const ValidatedModel& model, const QuadratureSpec& quad = {})
      : m_(model), quad_(quad) {}

  double operator()(const ParameterPoint& th) {
    const Dataset& d = m_.data;
    Eigen::VectorXd mu = d.X * th.beta;
    mu.array() += th.alpha;
    if (m_.spec.effects.kind == RandomEffectKind::intercept) {
      for (Eigen::Index i = 0; i < d.n(); ++i) mu[i] += th.effect[d.groups[static_cast<std::size_t>(i)]];
    } else if (m_.spec.effects.kind == RandomEffectKind::spatial) {
      mu += th.effect;
    }
    const double sigma = std::sqrt(th.sigma2);
    const double log_sigma = std::log(sigma);
    const HeavyDensityTable* table = nullptr;
    if (m_.spec.error.kind == ErrorKind::eh && th.s > 0.0) table = &table_for(th.gamma);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      const double e = (d.y[i] - mu[i]) / sigma;
      ll += log_standardized_density(e, th, table) - log_sigma;
    }
    return ll;
  }

 private:
  double log_standardized_density(double e, const ParameterPoint& th, const HeavyDensityTable* table) const {
    const double lphi = log_normal_density(e, 0.0, 1.0);
    switch (m_.spec.error.kind) {
      case ErrorKind::normal: return lphi;
      case ErrorKind::student_t: return log_student_t_density(e, m_.spec.error.nu);
      case ErrorKind::adaptive_t: return log_student_t_density(e, th.nu);
      case ErrorKind::mt: {
        const double heavy = th.s > 0.0 ? std::log(th.s) + log_student_t_density(e, m_.spec.error.nu)
                                        : -std::numeric_limits<double>::infinity();
        const double thin = th.s < 1.0 ? std::log1p(-th.s) + lphi : -std::numeric_limits<double>::infinity();
        return detail::log_sum(heavy, thin);
      }
      case ErrorKind::eh: {
        const double thin = th.s < 1.0 ? std::log1p(-th.s) + lphi : -std::numeric_limits<double>::infinity();
        if (th.s == 0.0) return thin;
        return detail::log_sum(std::log(th.s) + table->log_density(e), thin);
      }
    }
    return lphi;
  }

  const HeavyDensityTable& table_for(double gamma) {
    auto it = tables_.find(gamma);
    if (it == tables_.end()) {
      if (tables_.size() > 64) tables_.clear();
      it = tables_.emplace(gamma, HeavyDensityTable(gamma, 40.0, 2401, quad_)).first;
    }
    return it->second;
  }

  const ValidatedModel& m_;
  QuadratureSpec quad_;
  std::map<double, HeavyDensityTable> tables_;
};

/// Parameter point of retained draw `row`.
inline ParameterPoint parameter_point(const ChainOutput& out, const ValidatedModel& model, Eigen::Index row) {
  ParameterPoint th;
  th.beta = out.at("beta").row(row).transpose();
  th.sigma2 = out.scalar("sigma2")[row];
  if (out.has("alpha")) th.alpha = out.scalar("alpha")[row];
  if (out.has("s")) th.s = out.scalar("s")[row];
  th.gamma = out.has("gamma") ? out.scalar("gamma")[row] : model.prior.gamma.value;
  th.nu = out.has("nu") ? out.scalar("nu")[row] : model.spec.error.nu;
  if (out.has("b")) th.effect = out.at("b").row(row).transpose();
  if (out.has("eta")) th.effect = out.at("eta").row(row).transpose();
  return th;
}

/// Posterior-mean parameter point.
inline ParameterPoint mean_point(const ChainOutput& out, const ValidatedModel& model) {
  ParameterPoint th;
  th.beta = summarize_mean(out.at("beta"));
  th.sigma2 = out.scalar("sigma2").mean();
  if (out.has("alpha")) th.alpha = out.scalar("alpha").mean();
  if (out.has("s")) th.s = out.scalar("s").mean();
  th.gamma = out.has("gamma") ? out.scalar("gamma").mean() : model.prior.gamma.value;
  th.nu = out.has("nu") ? out.scalar("nu").mean() : model.spec.error.nu;
  if (out.has("b")) th.effect = summarize_mean(out.at("b"));
  if (out.has("eta")) th.effect = summarize_mean(out.at("eta"));
  return th;
}

struct DicResult {
  double dic = 0.0;
  double mean_deviance = 0.0;
  double deviance_at_mean = 0.0;
  double p_d = 0.0;
};

/// DIC = 2 mean D(theta) - D(mean theta), D = -2 log p(y | theta), with the
/// latent z and u integrated out of the error density.
inline DicResult dic(const ChainOutput& out, const ValidatedModel& model, const QuadratureSpec& quad = {}) {
  LikelihoodEvaluator loglik(model, quad);
  const Eigen::Index rows = out.retained();
  if (rows < 1) throw DomainError("dic: no draws");
  double sum = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) sum += -2.0 * loglik(parameter_point(out, model, r));
  DicResult res;
  res.mean_deviance = sum / static_cast<double>(rows);
  res.deviance_at_mean = -2.0 * loglik(mean_point(out, model));
  res.p_d = res.mean_deviance - res.deviance_at_mean;
  res.dic = 2.0 * res.mean_deviance - res.deviance_at_mean;
  return res;
}

// ---------------------------------------------------------------------------
// Robustness sweep
// ---------------------------------------------------------------------------

enum class RobustnessReference {
  outliers_removed,  // posterior given the non-outlying rows only
  clean_data         // posterior given the uncontaminated responses
};

struct RobustnessPoint {
  double omega = 0.0;
  double distance = 0.0;
  double mc_se = 0.0;
};

/// Applies the probe at magnitude omega: y_i = a_i + b_i omega for i in L.
inline Dataset contaminate(const Dataset& clean, const OutlierProbe& probe, double omega) {
  Dataset d = clean;
  for (std::size_t k = 0; k < probe.outliers.size(); ++k) {
    const auto i = probe.outliers[k];
    const double base = probe.base.empty() ? clean.y[i] : probe.base[k];
    d.y[i] = base + probe.slopes[k] * omega;
  }
  return d;
}

/// Posterior-mean distance curve ||E[beta | D_omega] - E[beta | D_ref]||_2.
/// The Monte Carlo standard error combines the per-coefficient standard
/// errors of both chains in quadrature; it is the typical size of the
/// distance when the two posteriors coincide. All chains share `mcmc.seed`.
inline std::vector<RobustnessPoint> robustness_sweep(const Dataset& data_clean, const OutlierProbe& probe,
                                                     const PriorConfig& prior, const ModelSpec& spec,
                                                     const std::vector<double>& magnitudes, const McmcOptions& mcmc,
                                                     RobustnessReference reference =
                                                         RobustnessReference::outliers_removed) {
  validate(prior, spec, data_clean, probe);
  Dataset ref_data = data_clean;
  if (reference == RobustnessReference::outliers_removed) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data_clean.n(); ++i) {
      if (std::find(probe.outliers.begin(), probe.outliers.end(), i) == probe.outliers.end()) keep.push_back(i);
    }
    ref_data = data_clean.subset(keep);
  }
  auto posterior_mean = [&](const Dataset& d, Eigen::VectorXd& se) {
    const ChainOutput out = run_model(validate(prior, spec, d), mcmc);
    const Eigen::MatrixXd& b = out.at("beta");
    se.resize(b.cols());
    for (Eigen::Index k = 0; k < b.cols(); ++k) se[k] = mc_standard_error(b.col(k));
    return summarize_mean(b);
  };
  Eigen::VectorXd ref_se;
  const Eigen::VectorXd ref_mean = posterior_mean(ref_data, ref_se);
  std::vector<RobustnessPoint> curve;
  for (double omega : magnitudes) {
    Eigen::VectorXd se;
    const Eigen::VectorXd m = posterior_mean(contaminate(data_clean, probe, omega), se);
    RobustnessPoint pt;
    pt.omega = omega;
    pt.distance = (m - ref_mean).norm();
    pt.mc_se = std::sqrt(se.squaredNorm() + ref_se.squaredNorm());
    curve.push_back(pt);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Tail-index ratio probe
// ---------------------------------------------------------------------------

struct DeltaRatio {
  double sigma = 1.0;
  double ratio = 0.0;
  double target = 1.0;  // sigma^{2 delta}
};

/// Single-outlier likelihood ratio [f1(y/sigma)/sigma] / f1(y) at residual
/// y under H(.; gamma, delta), against its large-|y| limit sigma^{2 delta}.
inline std::vector<DeltaRatio> delta_ratio_probe(double gamma, double delta, const std::vector<double>& sigma_values,
                                                 double y_magnitude, const QuadratureSpec& quad = {}) {
  const HParams h(gamma, delta, quad);
  const double base = heavy_component_density(y_magnitude, h, quad);
  std::vector<DeltaRatio> out;
  for (double sigma : sigma_values) {
    if (!(sigma > 0.0)) throw DomainError("delta_ratio_probe: sigma must be positive");
    DeltaRatio r;
    r.sigma = sigma;
    r.ratio = heavy_component_density(y_magnitude / sigma, h, quad) / sigma / base;
    r.target = std::pow(sigma, 2.0 * delta);
    out.push_back(r);
  }
  return out;
}

}  // namespace ehreg
