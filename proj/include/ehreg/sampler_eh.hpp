#pragma once

// Full conditionals of the partially collapsed Gibbs sampler for linear
// regression with EH errors. One sweep visits, in this order:
//   beta, sigma^2, z, (s, gamma), (v, w), u
// s and gamma are drawn with (v, w) integrated out, so they must follow z
// and precede the (v, w) refresh.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ehreg/dist_core.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"

namespace ehreg {

/// Latent scales are kept inside [kMinScale, kMaxScale]. H puts mass beyond
/// the double range (P(u > 1e300) is about 1/700 for gamma = 1); past this
/// bound an observation carries no information, so the clamp is immaterial.
inline constexpr double kMinScale = 1e-300;
inline constexpr double kMaxScale = 1e300;

inline double clamp_scale(double u) { return std::clamp(u, kMinScale, kMaxScale); }

/// log u_i, exact past the upper clamp.
inline double log_u_at(const ChainState& st, Eigen::Index i) {
  return st.u[i] >= kMaxScale && i < st.log_u.size() ? st.log_u[i] : std::log(st.u[i]);
}

/// log v_i, exact past the lower clamp.
inline double log_v_at(const ChainState& st, Eigen::Index i) {
  return st.v[i] <= kMinScale && i < st.log_v.size() ? st.log_v[i] : std::log(st.v[i]);
}

/// log(1 + u_i), exact past the upper clamp.
inline double log1p_u_at(const ChainState& st, Eigen::Index i) {
  if (st.u[i] < kMaxScale) return std::log1p(st.u[i]);
  const double lu = log_u_at(st, i);
  return lu + std::log1p(std::exp(-lu));
}

/// Sets u_i from its log, clamping the stored value.
inline void set_log_u(ChainState& st, Eigen::Index i, double lu) {
  if (st.log_u.size() != st.u.size()) st.log_u = st.u.array().log().matrix();
  st.log_u[i] = lu;
  st.u[i] = clamp_scale(std::exp(lu));
}

inline void set_log_v(ChainState& st, Eigen::Index i, double lv) {
  if (st.log_v.size() != st.v.size()) st.log_v = st.v.array().log().matrix();
  st.log_v[i] = lv;
  st.v[i] = clamp_scale(std::exp(lv));
}

/// log of a Ga(shape, 1) draw that stays exact when the draw underflows:
/// for shape < 1, Ga(shape) = Ga(shape + 1) U^{1/shape}.
inline double log_gamma_variate(RngStream& rng, double shape) {
  if (shape >= 1.0) return std::log(rng.gamma(shape, 1.0));
  const double g = rng.gamma(shape + 1.0, 1.0);
  return std::log(g) + std::log(rng.uniform()) / shape;
}

/// X' diag(d) X.
inline Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& d) {
  const Eigen::MatrixXd Xs = d.cwiseSqrt().asDiagonal() * X;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

/// beta | rest ~ N(B~ A~, B~) with
///   B~^{-1} = B^{-1} + sigma^{-2} X'DX,  A~ = B^{-1} A + sigma^{-2} X'D (y - offset)
/// for an explicit weight vector d = diag(D). prior_precision = B^{-1},
/// prior_linear = B^{-1} A.
inline Eigen::VectorXd update_beta_weighted(const ChainState& st, const Dataset& data,
                                            const Eigen::MatrixXd& prior_precision,
                                            const Eigen::VectorXd& prior_linear, const Eigen::VectorXd& d,
                                            RngStream& rng) {
  const double prec = 1.0 / st.sigma2;
  const Eigen::VectorXd ytilde = data.y - st.offset(data);
  const Eigen::MatrixXd q = prior_precision + prec * weighted_gram(data.X, d);
  const Eigen::VectorXd lin = prior_linear + prec * (data.X.transpose() * d.cwiseProduct(ytilde));
  return sample_mvn_canonical(rng, q, lin, "beta full conditional");
}

inline Eigen::VectorXd update_beta(const ChainState& st, const Dataset& data, const PriorConfig& prior,
                                   RngStream& rng) {
  const auto llt = detail::checked_llt(prior.B_beta, "B_beta");
  const Eigen::MatrixXd b_inv = llt.solve(Eigen::MatrixXd::Identity(prior.B_beta.rows(), prior.B_beta.cols()));
  return update_beta_weighted(st, data, b_inv, b_inv * prior.A_beta, st.precision_weights(), rng);
}

/// Shape and rate of sigma^{-2} | rest: a + n/2, b + sum_i d_i r_i^2 / 2.
inline std::pair<double, double> sigma2_conditional(const ChainState& st, const Dataset& data,
                                                    const PriorConfig& prior) {
  const Eigen::VectorXd r = st.residuals(data);
  const Eigen::VectorXd d = st.precision_weights();
  return {prior.a_sigma + 0.5 * static_cast<double>(data.n()), prior.b_sigma + 0.5 * d.dot(r.cwiseAbs2())};
}

inline double update_sigma2(const ChainState& st, const Dataset& data, const PriorConfig& prior, RngStream& rng) {
  const auto [shape, rate] = sigma2_conditional(st, data, prior);
  return 1.0 / rng.gamma(shape, rate);
}

/// P(z_i = 1 | rest) from the two component log-densities. Equal
/// log-densities of -inf carry no information and give probability 0.
inline double z_probability(double residual, double sigma2, double u, double s) {
  const double l1 = s > 0.0 ? std::log(s) + log_normal_density(residual, 0.0, sigma2 * u)
                            : -std::numeric_limits<double>::infinity();
  const double l0 = s < 1.0 ? std::log1p(-s) + log_normal_density(residual, 0.0, sigma2)
                            : -std::numeric_limits<double>::infinity();
  if (l1 == l0) return l1 == -std::numeric_limits<double>::infinity() ? 0.0 : 0.5;
  const double hi = std::max(l0, l1);
  const double e0 = std::exp(l0 - hi);
  const double e1 = std::exp(l1 - hi);
  return e1 / (e0 + e1);
}

inline Eigen::VectorXi update_z(const ChainState& st, const Dataset& data, RngStream& rng) {
  const Eigen::VectorXd r = st.residuals(data);
  Eigen::VectorXi z(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double p1 = z_probability(r[i], st.sigma2, st.u[i], st.s);
    z[i] = p1 > 0.0 && rng.uniform() < p1 ? 1 : 0;
  }
  return z;
}

/// s | z ~ Beta(a_s + sum z, b_s + n - sum z); a fixed s is returned as is.
inline double update_s(const ChainState& st, const PriorConfig& prior, RngStream& rng) {
  if (prior.fixed_s) return *prior.fixed_s;
  const double k = static_cast<double>(st.z.sum());
  const double n = static_cast<double>(st.z.size());
  return rng.beta(prior.a_s + k, prior.b_s + n - k);
}

/// Rate of gamma | u: b_gamma + sum_i log(1 + log(1 + u_i)).
inline double gamma_conditional_rate(const ChainState& st, const PriorConfig& prior) {
  double rate = prior.gamma.b;
  for (Eigen::Index i = 0; i < st.u.size(); ++i) rate += std::log1p(log1p_u_at(st, i));
  return rate;
}

/// gamma | u ~ Ga(a_gamma + n, rate) in the adaptive mode; unchanged otherwise.
inline double update_gamma(const ChainState& st, const PriorConfig& prior, RngStream& rng) {
  if (!prior.gamma.adaptive) return st.gamma;
  return rng.gamma(prior.gamma.a + static_cast<double>(st.u.size()), gamma_conditional_rate(st, prior));
}

/// w_i ~ Ga(1 + gamma, 1 + log(1 + u_i)), then v_i | w_i ~ Ga(1 + w_i, 1 + u_i).
/// A v_i below kMinScale keeps its exact log.
inline void update_vw(ChainState& st, RngStream& rng) {
  for (Eigen::Index i = 0; i < st.u.size(); ++i) {
    const double l1p = log1p_u_at(st, i);
    st.w[i] = rng.gamma(1.0 + st.gamma, 1.0 + l1p);
    const double g = rng.gamma(1.0 + st.w[i], 1.0);
    const double v = st.u[i] < kMaxScale ? g / (1.0 + st.u[i]) : 0.0;
    if (v >= kMinScale) {
      st.v[i] = v;
    } else {
      set_log_v(st, i, std::log(g) - l1p);
    }
  }
}

/// u_i ~ GIG(1/2, 2 v_i, r_i^2 / sigma^2) when z_i = 1, else Ga(1, v_i).
/// A u_i above kMaxScale keeps its exact log.
inline void update_u(ChainState& st, const Dataset& data, RngStream& rng) {
  const Eigen::VectorXd r = st.residuals(data);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (st.z[i]) {
      const double draw = sample_gig_half(rng, 2.0 * st.v[i], r[i] * r[i] / st.sigma2);
      if (draw < kMaxScale) {
        st.u[i] = clamp_scale(draw);
      } else {
        set_log_u(st, i, std::log(draw));
      }
      continue;
    }
    const double e = -std::log(rng.uniform());
    const double u = st.v[i] > kMinScale ? e / st.v[i] : std::numeric_limits<double>::infinity();
    if (u <= kMaxScale) {
      st.u[i] = clamp_scale(u);
    } else {
      set_log_u(st, i, std::log(e) - log_v_at(st, i));
    }
  }
}

}  // namespace ehreg
