#pragma once

// Horseshoe-prior regression y = alpha + X beta + sigma eps with
//   beta_k ~ N(0, sigma^2 tau^2 xi_k), sqrt(xi_k), tau ~ C+(0, 1)
// through xi_k | lambda_k ~ IG(1/2, 1/lambda_k), lambda_k ~ IG(1/2, 1) and
// tau^2 | nu ~ IG(1/2, 1/nu), nu ~ IG(1/2, 1).
//
// Observation weights are u_i^{-z_i} in the alpha and beta steps, and the
// prior quadratic form enters the sigma^2 rate with a factor 1/2; both are
// what the joint model implies.

#include <Eigen/Dense>

#include "ehreg/dist_core.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg {

/// alpha | rest ~ N(B/A, 1/A) with A = 1/A_alpha + sigma^{-2} sum d_i and
/// B = sigma^{-2} sum d_i (y_i - x_i' beta - other offsets).
inline double update_alpha(const ChainState& st, const Dataset& data, const PriorConfig& prior, RngStream& rng) {
  const Eigen::VectorXd d = st.precision_weights();
  const Eigen::VectorXd r = st.residuals(data).array() + st.hs.alpha;
  const double prec = 1.0 / prior.A_alpha + d.sum() / st.sigma2;
  const double mean = d.dot(r) / st.sigma2 / prec;
  return mean + rng.normal() / std::sqrt(prec);
}

/// Lambda^{-1} = diag(1 / (tau^2 xi_k)).
inline Eigen::VectorXd horseshoe_prior_precision(const HorseshoeState& hs) {
  return (hs.tau2 * hs.xi).cwiseInverse();
}

/// beta | rest ~ N(A^{-1} X'D y~, sigma^2 A^{-1}), A = Lambda^{-1} + X'DX, y~ = y - offsets.
inline Eigen::VectorXd update_beta_hs(const ChainState& st, const Dataset& data, RngStream& rng) {
  const Eigen::VectorXd d = st.precision_weights();
  const Eigen::VectorXd ytilde = data.y - st.offset(data);
  Eigen::MatrixXd a = weighted_gram(data.X, d);
  a.diagonal() += horseshoe_prior_precision(st.hs);
  const Eigen::MatrixXd q = a / st.sigma2;
  const Eigen::VectorXd lin = data.X.transpose() * d.cwiseProduct(ytilde) / st.sigma2;
  return sample_mvn_canonical(rng, q, lin, "horseshoe beta full conditional");
}

/// Shape and rate of sigma^{-2} | rest:
///   a + (n+p)/2,  b + sum d_i r_i^2 / 2 + beta' Lambda^{-1} beta / 2.
inline std::pair<double, double> sigma2_conditional_hs(const ChainState& st, const Dataset& data,
                                                       const PriorConfig& prior) {
  const Eigen::VectorXd r = st.residuals(data);
  const Eigen::VectorXd d = st.precision_weights();
  const double quad = st.beta.cwiseAbs2().dot(horseshoe_prior_precision(st.hs));
  return {prior.a_sigma + 0.5 * static_cast<double>(data.n() + data.p()),
          prior.b_sigma + 0.5 * d.dot(r.cwiseAbs2()) + 0.5 * quad};
}

inline double update_sigma2_hs(const ChainState& st, const Dataset& data, const PriorConfig& prior, RngStream& rng) {
  const auto [shape, rate] = sigma2_conditional_hs(st, data, prior);
  return 1.0 / rng.gamma(shape, rate);
}

/// xi_k, lambda_k, tau^2, nu in turn:
///   xi_k     ~ IG(1, 1/lambda_k + beta_k^2 / (2 tau^2 sigma^2))
///   lambda_k ~ IG(1, 1 + 1/xi_k)
///   tau^2    ~ IG((p+1)/2, 1/nu + sum beta_k^2 / (2 xi_k sigma^2))
///   nu       ~ IG(1, 1 + 1/tau^2)
inline HorseshoeState update_horseshoe_locals(const ChainState& st, RngStream& rng) {
  HorseshoeState hs = st.hs;
  const Eigen::Index p = st.beta.size();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double b2 = st.beta[k] * st.beta[k];
    hs.xi[k] = clamp_scale(rng.inv_gamma(1.0, 1.0 / hs.lambda[k] + 0.5 * b2 / (hs.tau2 * st.sigma2)));
    hs.lambda[k] = clamp_scale(rng.inv_gamma(1.0, 1.0 + 1.0 / hs.xi[k]));
  }
  double ss = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) ss += st.beta[k] * st.beta[k] / hs.xi[k];
  hs.tau2 = clamp_scale(rng.inv_gamma(0.5 * static_cast<double>(p + 1), 1.0 / hs.nu + 0.5 * ss / st.sigma2));
  hs.nu = clamp_scale(rng.inv_gamma(1.0, 1.0 + 1.0 / hs.tau2));
  return hs;
}

}  // namespace ehreg
