#pragma once

// Joint-distribution ("getting it right") check of a Gibbs kernel.
//
// The marginal-conditional simulator draws (theta, y) from prior and
// likelihood directly. The successive-conditional simulator alternates one
// kernel transition with a fresh y | theta. Both target the same joint law
// only if the kernel leaves the posterior invariant, so the means of test
// functionals must agree. Standard errors of the successive chain use batch
// means.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/gibbs.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg {

/// Exact draw of every parameter and latent variable of the model from
/// its prior. The prior must be proper; spatial fields are not supported.
inline ChainState draw_prior_state(const ValidatedModel& m, RngStream& rng) {
  const Eigen::Index n = m.data.n();
  const Eigen::Index p = m.data.p();
  const PriorConfig& pr = m.prior;
  ChainState st = initial_state(m);
  st.sigma2 = 1.0 / rng.gamma(pr.a_sigma, pr.b_sigma);
  if (pr.beta_prior == BetaPrior::horseshoe) {
    for (Eigen::Index k = 0; k < p; ++k) {
      st.hs.lambda[k] = clamp_scale(rng.inv_gamma(0.5, 1.0));
      st.hs.xi[k] = clamp_scale(rng.inv_gamma(0.5, 1.0 / st.hs.lambda[k]));
    }
    st.hs.nu = clamp_scale(rng.inv_gamma(0.5, 1.0));
    st.hs.tau2 = clamp_scale(rng.inv_gamma(0.5, 1.0 / st.hs.nu));
    st.hs.alpha = std::sqrt(pr.A_alpha) * rng.normal();
    for (Eigen::Index k = 0; k < p; ++k) st.beta[k] = std::sqrt(st.sigma2 * st.hs.tau2 * st.hs.xi[k]) * rng.normal();
  } else {
    st.beta = sample_mvn(rng, pr.A_beta, pr.B_beta);
  }
  st.s = pr.fixed_s ? *pr.fixed_s : rng.beta(pr.a_s, pr.b_s);
  st.gamma = pr.gamma.adaptive ? rng.gamma(pr.gamma.a, pr.gamma.b) : pr.gamma.value;

  const auto& err = m.spec.error;
  switch (err.kind) {
    case ErrorKind::normal:
      break;
    case ErrorKind::student_t:
    case ErrorKind::adaptive_t: {
      if (err.kind == ErrorKind::adaptive_t) st.nu_t = err.nu_grid[rng.index(err.nu_grid.size())];
      const double nu = err.kind == ErrorKind::adaptive_t ? st.nu_t : err.nu;
      for (Eigen::Index i = 0; i < n; ++i) st.u[i] = clamp_scale(rng.inv_gamma(0.5 * nu, 0.5 * nu));
      break;
    }
    case ErrorKind::eh:
      for (Eigen::Index i = 0; i < n; ++i) {
        st.z[i] = rng.uniform() < st.s ? 1 : 0;
        st.w[i] = rng.gamma(st.gamma, 1.0);
        const double lv = log_gamma_variate(rng, st.w[i]);
        set_log_v(st, i, lv);
        set_log_u(st, i, std::log(-std::log(rng.uniform())) - lv);
      }
      break;
    case ErrorKind::mt:
      for (Eigen::Index i = 0; i < n; ++i) {
        st.z[i] = rng.uniform() < st.s ? 1 : 0;
        st.u[i] = clamp_scale(rng.inv_gamma(0.5 * err.nu, 0.5 * err.nu));
      }
      break;
  }

  switch (m.spec.effects.kind) {
    case RandomEffectKind::none:
      break;
    case RandomEffectKind::intercept:
      st.tau_v2 = rng.inv_gamma(pr.a_v, pr.b_v);
      for (Eigen::Index j = 0; j < st.b.size(); ++j) st.b[j] = std::sqrt(st.tau_v2) * rng.normal();
      break;
    case RandomEffectKind::spatial:
      throw UnsupportedParameter("draw_prior_state: spatial fields are not supported");
  }
  return st;
}

/// y | theta: x_i' beta + offset_i + sigma sqrt(u_i^{z_i}) eps_i.
inline Eigen::VectorXd draw_response(const ChainState& st, const Dataset& data, RngStream& rng) {
  Eigen::VectorXd y = data.X * st.beta + st.offset(data);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double var = st.sigma2 * (st.z[i] ? st.u[i] : 1.0);
    y[i] += std::sqrt(var) * rng.normal();
  }
  return y;
}

struct GirFunctional {
  std::string name;
  std::function<double(const ChainState&, const Dataset&)> f;
};

/// Functionals of every sampled block, bounded where the prior has heavy
/// tails. Latent-scale indicators make the check sensitive to the auxiliary
/// refreshes, which leave the parameter marginals unchanged when omitted.
inline std::vector<GirFunctional> default_functionals(const ValidatedModel& m) {
  std::vector<GirFunctional> fs;
  const bool hs = m.prior.beta_prior == BetaPrior::horseshoe;
  const auto kind = m.spec.error.kind;
  for (Eigen::Index k = 0; k < m.data.p(); ++k) {
    const std::string b = "beta[" + std::to_string(k) + "]";
    if (hs) {
      fs.push_back({"atan " + b, [k](const ChainState& s, const Dataset&) { return std::atan(s.beta[k]); }});
      fs.push_back({"1{|" + b + "|<0.5}", [k](const ChainState& s, const Dataset&) { return std::abs(s.beta[k]) < 0.5 ? 1.0 : 0.0; }});
    } else {
      fs.push_back({b, [k](const ChainState& s, const Dataset&) { return s.beta[k]; }});
      fs.push_back({b + "^2", [k](const ChainState& s, const Dataset&) { return s.beta[k] * s.beta[k]; }});
    }
  }
  fs.push_back({"sigma2", [](const ChainState& s, const Dataset&) { return s.sigma2; }});
  fs.push_back({"1/sigma2", [](const ChainState& s, const Dataset&) { return 1.0 / s.sigma2; }});
  if (hs) {
    fs.push_back({"alpha", [](const ChainState& s, const Dataset&) { return s.hs.alpha; }});
    fs.push_back({"1{tau2<1}", [](const ChainState& s, const Dataset&) { return s.hs.tau2 < 1.0 ? 1.0 : 0.0; }});
    fs.push_back({"1{xi[0]<1}", [](const ChainState& s, const Dataset&) { return s.hs.xi[0] < 1.0 ? 1.0 : 0.0; }});
    fs.push_back({"1{lambda[0]<1}", [](const ChainState& s, const Dataset&) { return s.hs.lambda[0] < 1.0 ? 1.0 : 0.0; }});
  }
  if (m.spec.error.is_mixture() && !m.prior.fixed_s) {
    fs.push_back({"s", [](const ChainState& s, const Dataset&) { return s.s; }});
    fs.push_back({"s^2", [](const ChainState& s, const Dataset&) { return s.s * s.s; }});
  }
  if (m.spec.error.is_mixture()) {
    fs.push_back({"z[0]", [](const ChainState& s, const Dataset&) { return static_cast<double>(s.z[0]); }});
  }
  if (kind == ErrorKind::eh && m.prior.gamma.adaptive) {
    fs.push_back({"gamma", [](const ChainState& s, const Dataset&) { return s.gamma; }});
  }
  if (kind == ErrorKind::adaptive_t) {
    fs.push_back({"nu", [](const ChainState& s, const Dataset&) { return s.nu_t; }});
  }
  if (m.spec.error.uses_scales()) {
    const double cut = kind == ErrorKind::eh ? std::expm1(1.0) : 1.0;
    fs.push_back({"1{u[0]<=c}", [cut](const ChainState& s, const Dataset&) { return s.u[0] <= cut ? 1.0 : 0.0; }});
    fs.push_back({"atan log u[0]", [](const ChainState& s, const Dataset&) { return std::atan(log_u_at(s, 0)); }});
  }
  if (kind == ErrorKind::eh) {
    fs.push_back({"1{v[0]<1}", [](const ChainState& s, const Dataset&) { return s.v[0] < 1.0 ? 1.0 : 0.0; }});
  }
  if (m.spec.effects.kind == RandomEffectKind::intercept) {
    fs.push_back({"b[0]", [](const ChainState& s, const Dataset&) { return s.b[0]; }});
    fs.push_back({"tau_v2", [](const ChainState& s, const Dataset&) { return s.tau_v2; }});
  }
  fs.push_back({"atan y[0]", [](const ChainState&, const Dataset& d) { return std::atan(d.y[0]); }});
  fs.push_back({"1{|y[0]|<1}", [](const ChainState&, const Dataset& d) { return std::abs(d.y[0]) < 1.0 ? 1.0 : 0.0; }});
  return fs;
}

struct GirLine {
  std::string name;
  double marginal_mean = 0.0;
  double marginal_se = 0.0;
  double successive_mean = 0.0;
  double successive_se = 0.0;
  double z = 0.0;
};

struct GirReport {
  std::vector<GirLine> lines;
  double threshold = 4.0;
  double max_abs_z = 0.0;
  bool pass = false;
  std::string worst;
};

/// A transition of the kernel under test: updates every parameter and
/// latent block given the current response.
using GirKernel = std::function<void(ChainState&, const Dataset&)>;

/// Runs both simulators for `rounds` draws each.
inline GirReport getting_it_right(const ValidatedModel& model, const GirKernel& kernel, long rounds,
                                  std::uint64_t seed, std::vector<GirFunctional> functionals = {},
                                  double threshold = 4.0) {
  if (functionals.empty()) functionals = default_functionals(model);
  const std::size_t nf = functionals.size();
  RngStream prior_rng = RngStream(seed).child(10);
  RngStream data_rng = RngStream(seed).child(11);
  Dataset data = model.data;

  std::vector<double> mc_sum(nf, 0.0), mc_sq(nf, 0.0);
  for (long r = 0; r < rounds; ++r) {
    const ChainState st = draw_prior_state(model, prior_rng);
    data.y = draw_response(st, data, data_rng);
    for (std::size_t f = 0; f < nf; ++f) {
      const double v = functionals[f].f(st, data);
      mc_sum[f] += v;
      mc_sq[f] += v * v;
    }
  }

  const long batches = std::min<long>(50, std::max<long>(2, rounds / 10));
  const long batch_len = std::max<long>(1, rounds / batches);
  const long used = batch_len * batches;
  std::vector<std::vector<double>> batch_mean(nf, std::vector<double>(static_cast<std::size_t>(batches), 0.0));
  ChainState st = draw_prior_state(model, prior_rng);
  data.y = draw_response(st, data, data_rng);
  for (long r = 0; r < used; ++r) {
    kernel(st, data);
    data.y = draw_response(st, data, data_rng);
    const auto b = static_cast<std::size_t>(r / batch_len);
    for (std::size_t f = 0; f < nf; ++f) batch_mean[f][b] += functionals[f].f(st, data) / static_cast<double>(batch_len);
  }

  GirReport rep;
  rep.threshold = threshold;
  rep.pass = true;
  for (std::size_t f = 0; f < nf; ++f) {
    GirLine line;
    line.name = functionals[f].name;
    const double n = static_cast<double>(rounds);
    line.marginal_mean = mc_sum[f] / n;
    const double var = std::max(0.0, mc_sq[f] / n - line.marginal_mean * line.marginal_mean);
    line.marginal_se = std::sqrt(var / n);
    double bs = 0.0, bsq = 0.0;
    for (double v : batch_mean[f]) {
      bs += v;
      bsq += v * v;
    }
    const double nb = static_cast<double>(batches);
    line.successive_mean = bs / nb;
    const double bvar = std::max(0.0, (bsq - nb * line.successive_mean * line.successive_mean) / (nb - 1.0));
    line.successive_se = std::sqrt(bvar / nb);
    const double se = std::hypot(line.marginal_se, line.successive_se);
    line.z = se > 0.0 ? (line.successive_mean - line.marginal_mean) / se
                      : (line.successive_mean == line.marginal_mean ? 0.0 : std::numeric_limits<double>::infinity());
    if (!(std::abs(line.z) < threshold)) rep.pass = false;
    if (!(std::abs(line.z) <= rep.max_abs_z)) {
      rep.max_abs_z = std::abs(line.z);
      rep.worst = line.name;
    }
    rep.lines.push_back(line);
  }
  return rep;
}

/// Kernel of the production sampler for a model.
inline GirKernel sampler_kernel(const ValidatedModel& model, std::uint64_t seed) {
  auto sampler = std::make_shared<GibbsSampler>(model, seed);
  return [sampler](ChainState& st, const Dataset& data) {
    sampler->set_response(data.y);
    sampler->set_state(st);
    sampler->sweep();
    st = sampler->state();
  };
}

/// Shape of the tiny synthetic problem: n rows, p covariates from N(0, 1).
struct GirShape {
  int n = 3;
  int p = 1;
};

/// Getting-it-right check of the production kernel on a tiny random design.
inline GirReport getting_it_right_check(const PriorConfig& prior, const ModelSpec& spec, const GirShape& shape,
                                        long rounds, std::uint64_t seed = 1) {
  if (shape.n > 5 || shape.p < 1) throw DomainError("getting_it_right_check: use n <= 5 and p >= 1");
  RngStream rng = RngStream(seed).child(12);
  Dataset d;
  d.X.resize(shape.n, shape.p);
  for (int i = 0; i < shape.n; ++i) {
    for (int k = 0; k < shape.p; ++k) d.X(i, k) = rng.normal();
  }
  d.y = Eigen::VectorXd::Zero(shape.n);
  if (spec.effects.kind == RandomEffectKind::intercept) {
    for (int i = 0; i < shape.n; ++i) d.groups.push_back(i % 2);
  }
  const ValidatedModel m = validate(prior, spec, d);
  return getting_it_right(m, sampler_kernel(m, seed), rounds, seed);
}

/// Proper priors used by the self-checks: sigma^{-2} ~ Ga(4, 3), beta ~ N(0, 1).
inline PriorConfig gir_prior(Eigen::Index p) {
  PriorConfig pr;
  pr.a_sigma = 4.0;
  pr.b_sigma = 3.0;
  pr.A_beta = Eigen::VectorXd::Zero(p);
  pr.B_beta = Eigen::MatrixXd::Identity(p, p);
  pr.a_s = 2.0;
  pr.b_s = 2.0;
  pr.a_v = 4.0;
  pr.b_v = 3.0;
  pr.A_alpha = 1.0;
  return pr;
}

}  // namespace ehreg
