#pragma once

// The Gibbs engine: one sampler class drives every error model, beta prior
// and random-effect structure by composing the block updates.
//
// Three independent random streams feed the sweep: coefficients (alpha,
// beta, sigma^2, horseshoe locals), random effects, and latent scales. With
// s held at 0 the EH, MT and normal chains therefore consume identical
// coefficient streams and produce identical beta draws.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ehreg/baselines.hpp"
#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/horseshoe.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/random_effects.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg {

/// Deterministic starting point: least squares for beta (and alpha),
/// residual variance for sigma^2, z = 0 (1 for Student t), u = v = w = 1,
/// s = 0.5, horseshoe locals at 1, random effects at 0.
inline ChainState initial_state(const ValidatedModel& m) {
  const Dataset& d = m.data;
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  const bool hs = m.prior.beta_prior == BetaPrior::horseshoe;
  ChainState st;
  st.has_alpha = hs;
  st.effects = m.spec.effects.kind;

  Eigen::MatrixXd design(n, p + (hs ? 1 : 0));
  if (hs) design.col(0).setOnes();
  design.rightCols(p) = d.X;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(design.cols());
  if (design.cols() > 0) coef = design.colPivHouseholderQr().solve(d.y);
  if (!coef.allFinite()) coef.setZero();
  st.beta = coef.tail(p);
  st.hs.alpha = hs ? coef[0] : 0.0;
  const Eigen::VectorXd resid = d.y - design * coef;
  const double dof = static_cast<double>(std::max<Eigen::Index>(n - design.cols(), 1));
  st.sigma2 = resid.squaredNorm() / dof;
  if (!(st.sigma2 > 1e-12) || !std::isfinite(st.sigma2)) st.sigma2 = 1.0;

  const bool t_model = m.spec.error.kind == ErrorKind::student_t || m.spec.error.kind == ErrorKind::adaptive_t;
  st.z = Eigen::VectorXi::Constant(n, t_model ? 1 : 0);
  st.u = Eigen::VectorXd::Ones(n);
  st.v = Eigen::VectorXd::Ones(n);
  st.w = Eigen::VectorXd::Ones(n);
  st.log_u = Eigen::VectorXd::Zero(n);
  st.log_v = Eigen::VectorXd::Zero(n);
  st.s = m.prior.fixed_s.value_or(0.5);
  st.gamma = m.prior.gamma.value;
  if (m.spec.error.kind == ErrorKind::adaptive_t) {
    const auto& g = m.spec.error.nu_grid;
    st.nu_t = g[g.size() / 2];
  } else {
    st.nu_t = m.spec.error.nu;
  }
  st.hs.xi = Eigen::VectorXd::Ones(p);
  st.hs.lambda = Eigen::VectorXd::Ones(p);
  st.hs.tau2 = 1.0;
  st.hs.nu = 1.0;
  if (st.effects == RandomEffectKind::intercept) st.b = Eigen::VectorXd::Zero(d.num_groups());
  if (st.effects == RandomEffectKind::spatial) {
    st.b = Eigen::VectorXd::Zero(n);
    st.h = 0.5 * m.h_max;
  }
  return st;
}

class GibbsSampler {
 public:
  GibbsSampler(ValidatedModel model, std::uint64_t seed)
      : m_(std::move(model)),
        st_(initial_state(m_)),
        coef_rng_(RngStream(seed).child(0)),
        effect_rng_(RngStream(seed).child(1)),
        latent_rng_(RngStream(seed).child(2)) {
    if (m_.prior.beta_prior == BetaPrior::normal) {
      const auto llt = detail::checked_llt(m_.prior.B_beta, "B_beta");
      b_inv_ = llt.solve(Eigen::MatrixXd::Identity(m_.data.p(), m_.data.p()));
      b_inv_a_ = b_inv_ * m_.prior.A_beta;
    }
    if (st_.effects == RandomEffectKind::spatial) {
      gp_.emplace(m_.data.coords, st_.h, m_.spec.effects.jitter);
    }
  }

  const ValidatedModel& model() const { return m_; }
  const ChainState& state() const { return st_; }

  /// Replaces the current state (e.g. with a prior draw).
  void set_state(const ChainState& st) {
    st_ = st;
    if (gp_) gp_->set_h(st_.h);
  }

  void set_response(const Eigen::VectorXd& y) {
    if (y.size() != m_.data.n()) throw DomainError("set_response: length mismatch");
    m_.data.y = y;
  }

  double mh_acceptance() const { return mh_proposed_ ? static_cast<double>(mh_accepted_) / mh_proposed_ : 0.0; }

  void sweep() {
    const Dataset& d = m_.data;
    const PriorConfig& pr = m_.prior;
    if (pr.beta_prior == BetaPrior::horseshoe) {
      st_.hs.alpha = update_alpha(st_, d, pr, coef_rng_);
      st_.beta = update_beta_hs(st_, d, coef_rng_);
      st_.sigma2 = update_sigma2_hs(st_, d, pr, coef_rng_);
      st_.hs = update_horseshoe_locals(st_, coef_rng_);
    } else {
      st_.beta = update_beta_weighted(st_, d, b_inv_, b_inv_a_, st_.precision_weights(), coef_rng_);
      st_.sigma2 = update_sigma2(st_, d, pr, coef_rng_);
    }

    if (st_.effects == RandomEffectKind::intercept) {
      st_.b = update_random_intercepts(st_, d, effect_rng_);
      st_.tau_v2 = update_tau_v2(st_, pr, effect_rng_);
    } else if (st_.effects == RandomEffectKind::spatial) {
      ++mh_proposed_;
      if (update_gp_hyper(st_, d, pr, m_.h_max, *gp_, effect_rng_)) ++mh_accepted_;
      st_.b = update_spatial_field(st_, d, *gp_, effect_rng_);
    }

    switch (m_.spec.error.kind) {
      case ErrorKind::normal:
        break;
      case ErrorKind::student_t:
        st_.u = update_u_t(st_, d, m_.spec.error.nu, latent_rng_);
        break;
      case ErrorKind::adaptive_t:
        st_.u = update_u_t(st_, d, st_.nu_t, latent_rng_);
        st_.nu_t = update_nu_grid(st_, m_.spec.error.nu_grid, latent_rng_);
        break;
      case ErrorKind::eh:
        st_.z = update_z(st_, d, latent_rng_);
        st_.s = update_s(st_, pr, latent_rng_);
        st_.gamma = update_gamma(st_, pr, latent_rng_);
        update_vw(st_, latent_rng_);
        update_u(st_, d, latent_rng_);
        break;
      case ErrorKind::mt:
        st_.z = update_z(st_, d, latent_rng_);
        st_.s = update_s(st_, pr, latent_rng_);
        st_.u = update_u_mt(st_, d, m_.spec.error.nu, latent_rng_);
        break;
    }
  }

 private:
  ValidatedModel m_;
  ChainState st_;
  RngStream coef_rng_;
  RngStream effect_rng_;
  RngStream latent_rng_;
  Eigen::MatrixXd b_inv_;
  Eigen::VectorXd b_inv_a_;
  std::optional<SpatialCache> gp_;
  long mh_accepted_ = 0;
  long mh_proposed_ = 0;
};

namespace detail {

inline std::vector<std::string> index_labels(Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < k; ++i) out.push_back(std::to_string(i));
  return out;
}

/// Row-wise recorder for the blocks a model exposes.
class Recorder {
 public:
  Recorder(ChainOutput& out, Eigen::Index rows) : out_(out), rows_(rows) {}

  void add(const std::string& name, std::vector<std::string> labels) {
    out_.order.push_back(name);
    out_.draws[name] = Eigen::MatrixXd::Zero(rows_, static_cast<Eigen::Index>(labels.size()));
    out_.labels[name] = std::move(labels);
  }
  void scalar(const std::string& name) { add(name, {""}); }

  template <class Derived>
  void put(const std::string& name, Eigen::Index row, const Eigen::MatrixBase<Derived>& v) {
    out_.draws.at(name).row(row) = v.transpose();
  }
  void put(const std::string& name, Eigen::Index row, double v) { out_.draws.at(name)(row, 0) = v; }

 private:
  ChainOutput& out_;
  Eigen::Index rows_;
};

}  // namespace detail

/// Runs one chain and records the retained draws. Every model records beta
/// and sigma2; mixture models add s (and gamma for EH), adaptive t adds nu,
/// the horseshoe adds alpha and tau2, random effects add b with tau_v2 or
/// eta with kappa2 and h. u and z are recorded on request.
inline ChainOutput run_model(const ValidatedModel& model, const McmcOptions& opt) {
  if (opt.thin < 1) throw ValidationError({"thin must be at least 1"});
  if (opt.burn_in < 0) throw ValidationError({"burn-in must be nonnegative"});
  if (opt.n_iter <= opt.burn_in || (opt.n_iter - opt.burn_in) / opt.thin < 1) {
    throw ValidationError({"nothing retained: n_iter (" + std::to_string(opt.n_iter) + ") must exceed burn_in (" +
                           std::to_string(opt.burn_in) + ") by at least one thinning interval"});
  }
  ChainOutput out;
  out.n_iter = opt.n_iter;
  out.burn_in = opt.burn_in;
  out.thin = opt.thin;
  out.seed = opt.seed;
  out.model_tag = model.tag();
  const Eigen::Index rows = out.retained();
  const Dataset& d = model.data;
  const auto kind = model.spec.error.kind;
  const bool hs = model.prior.beta_prior == BetaPrior::horseshoe;
  const auto effects = model.spec.effects.kind;

  detail::Recorder rec(out, rows);
  if (hs) rec.scalar("alpha");
  rec.add("beta", d.covariate_names.empty() ? detail::index_labels(d.p()) : d.covariate_names);
  rec.scalar("sigma2");
  if (model.spec.error.is_mixture()) rec.scalar("s");
  if (kind == ErrorKind::eh) rec.scalar("gamma");
  if (kind == ErrorKind::adaptive_t) rec.scalar("nu");
  if (hs) rec.scalar("tau2");
  if (effects == RandomEffectKind::intercept) {
    rec.add("b", detail::index_labels(d.num_groups()));
    rec.scalar("tau_v2");
  } else if (effects == RandomEffectKind::spatial) {
    rec.add("eta", detail::index_labels(d.n()));
    rec.scalar("kappa2");
    rec.scalar("h");
  }
  if (opt.record_latent) {
    rec.add("u", detail::index_labels(d.n()));
    rec.add("z", detail::index_labels(d.n()));
  }

  GibbsSampler sampler(model, opt.seed);
  Eigen::VectorXd z_sum = Eigen::VectorXd::Zero(d.n());
  Eigen::Index row = 0;
  for (int it = 0; it < opt.n_iter && row < rows; ++it) {
    try {
      sampler.sweep();
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ": " + e.what(), e.residual());
    }
    if (it < opt.burn_in || (it - opt.burn_in) % opt.thin != 0) continue;
    const ChainState& st = sampler.state();
    if (hs) rec.put("alpha", row, st.hs.alpha);
    rec.put("beta", row, st.beta);
    rec.put("sigma2", row, st.sigma2);
    if (model.spec.error.is_mixture()) rec.put("s", row, st.s);
    if (kind == ErrorKind::eh) rec.put("gamma", row, st.gamma);
    if (kind == ErrorKind::adaptive_t) rec.put("nu", row, st.nu_t);
    if (hs) rec.put("tau2", row, st.hs.tau2);
    if (effects == RandomEffectKind::intercept) {
      rec.put("b", row, st.b);
      rec.put("tau_v2", row, st.tau_v2);
    } else if (effects == RandomEffectKind::spatial) {
      rec.put("eta", row, st.b);
      rec.put("kappa2", row, st.kappa2);
      rec.put("h", row, st.h);
    }
    if (opt.record_latent) {
      rec.put("u", row, st.u);
      rec.put("z", row, st.z.cast<double>());
    }
    z_sum += st.z.cast<double>();
    ++row;
  }
  if (model.spec.error.is_mixture()) out.z_mean = z_sum / static_cast<double>(rows);
  out.mh_acceptance = sampler.mh_acceptance();
  return out;
}

inline McmcOptions mcmc_options(int n_iter, int burn_in, int thin, std::uint64_t seed) {
  McmcOptions o;
  o.n_iter = n_iter;
  o.burn_in = burn_in;
  o.thin = thin;
  o.seed = seed;
  return o;
}

/// EH regression chain.
inline ChainOutput run_chain(const Dataset& data, const PriorConfig& prior, int n_iter, int burn_in, int thin,
                             std::uint64_t seed) {
  ModelSpec spec;
  spec.error = ErrorModel::eh();
  return run_model(validate(prior, spec, data), mcmc_options(n_iter, burn_in, thin, seed));
}

inline ChainOutput run_chain_normal(const Dataset& data, const PriorConfig& prior, const McmcOptions& mcmc) {
  ModelSpec spec;
  spec.error = ErrorModel::normal();
  return run_model(validate(prior, spec, data), mcmc);
}

inline ChainOutput run_chain_t(const Dataset& data, const PriorConfig& prior, double nu, const McmcOptions& mcmc) {
  ModelSpec spec;
  spec.error = ErrorModel::t(nu);
  return run_model(validate(prior, spec, data), mcmc);
}

inline ChainOutput run_chain_adaptive_t(const Dataset& data, const PriorConfig& prior, std::vector<double> grid,
                                        const McmcOptions& mcmc) {
  ModelSpec spec;
  spec.error = ErrorModel::adaptive_t(std::move(grid));
  return run_model(validate(prior, spec, data), mcmc);
}

inline ChainOutput run_chain_mt(const Dataset& data, const PriorConfig& prior, double nu, const McmcOptions& mcmc) {
  ModelSpec spec;
  spec.error = ErrorModel::mt(nu);
  return run_model(validate(prior, spec, data), mcmc);
}

}  // namespace ehreg
