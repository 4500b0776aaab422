#pragma once

// Hand-rolled kernels for the joint-distribution check, written out block
// by block so that single lines can be broken on purpose.

#include <memory>

#include "ehreg/getting_it_right.hpp"
#include "ehreg/horseshoe.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg::testing {

inline Dataset tiny_design() {
  RngStream rng(12);
  Dataset d;
  d.X.resize(3, 1);
  for (int i = 0; i < 3; ++i) d.X(i, 0) = rng.normal();
  d.y = Eigen::VectorXd::Zero(3);
  return d;
}

enum class EhMutation { none, unscaled_weights, skip_vw };

inline GirKernel eh_kernel(const ValidatedModel& m, EhMutation mut) {
  auto rng = std::make_shared<RngStream>(99);
  const Eigen::MatrixXd b_inv = m.prior.B_beta.inverse();
  const Eigen::VectorXd b_inv_a = b_inv * m.prior.A_beta;
  return [&m, rng, mut, b_inv, b_inv_a](ChainState& st, const Dataset& data) {
    const Eigen::VectorXd dw =
        mut == EhMutation::unscaled_weights ? Eigen::VectorXd(st.u.cwiseInverse()) : st.precision_weights();
    st.beta = update_beta_weighted(st, data, b_inv, b_inv_a, dw, *rng);
    st.sigma2 = update_sigma2(st, data, m.prior, *rng);
    st.z = update_z(st, data, *rng);
    st.s = update_s(st, m.prior, *rng);
    st.gamma = update_gamma(st, m.prior, *rng);
    if (mut != EhMutation::skip_vw) update_vw(st, *rng);
    update_u(st, data, *rng);
  };
}

inline GirKernel horseshoe_kernel(const ValidatedModel& m, bool drop_half) {
  auto rng = std::make_shared<RngStream>(98);
  return [&m, rng, drop_half](ChainState& st, const Dataset& data) {
    st.hs.alpha = update_alpha(st, data, m.prior, *rng);
    st.beta = update_beta_hs(st, data, *rng);
    if (drop_half) {
      const auto [a, b] = sigma2_conditional_hs(st, data, m.prior);
      const double q = st.beta.cwiseAbs2().dot(horseshoe_prior_precision(st.hs));
      st.sigma2 = 1.0 / rng->gamma(a, b + 0.5 * q);
    } else {
      st.sigma2 = update_sigma2_hs(st, data, m.prior, *rng);
    }
    st.hs = update_horseshoe_locals(st, *rng);
  };
}

}  // namespace ehreg::testing
