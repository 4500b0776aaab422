#pragma once

// Random effects y = X beta + G b + sigma eps for two structures:
// per-group intercepts b_j ~ N(0, tau_v^2), and a Gaussian-process field
// eta ~ N(0, kappa^2 C(h)) over spatial coordinates with h ~ U(0, h_M).

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg {

/// Independent draws b_j | rest ~ N(m_j / P_j, 1 / P_j) with
///   P_j = 1/tau_v^2 + sigma^{-2} sum_{i in j} d_i,  m_j = sigma^{-2} sum_{i in j} d_i r_i
/// where r_i = y_i - x_i' beta - alpha excludes the intercepts themselves.
inline Eigen::VectorXd update_random_intercepts(const ChainState& st, const Dataset& data, RngStream& rng) {
  const Eigen::Index m = st.b.size();
  const Eigen::VectorXd d = st.precision_weights();
  Eigen::VectorXd prec = Eigen::VectorXd::Constant(m, 1.0 / st.tau_v2);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(m);
  const double a = st.has_alpha ? st.hs.alpha : 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int g = data.groups[static_cast<std::size_t>(i)];
    const double r = data.y[i] - data.X.row(i).dot(st.beta) - a;
    prec[g] += d[i] / st.sigma2;
    lin[g] += d[i] * r / st.sigma2;
  }
  Eigen::VectorXd b(m);
  for (Eigen::Index j = 0; j < m; ++j) b[j] = lin[j] / prec[j] + rng.normal() / std::sqrt(prec[j]);
  return b;
}

/// tau_v^2 | b ~ IG(a_v + m/2, b_v + sum b_j^2 / 2).
inline double update_tau_v2(const ChainState& st, const PriorConfig& prior, RngStream& rng) {
  return rng.inv_gamma(prior.a_v + 0.5 * static_cast<double>(st.b.size()), prior.b_v + 0.5 * st.b.squaredNorm());
}

/// Squared-exponential correlation C(h) + jitter I and its Cholesky factor.
/// Rebuilt only when h changes.
class SpatialCache {
 public:
  SpatialCache(const Eigen::MatrixXd& coords, double h, double jitter) : jitter_(jitter) {
    const Eigen::Index n = coords.rows();
    sqdist_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) sqdist_(i, j) = (coords.row(i) - coords.row(j)).squaredNorm();
    }
    set_h(h);
  }

  void set_h(double h) {
    if (h == h_ && corr_.size() > 0) return;
    h_ = h;
    corr_ = correlation(h);
    llt_ = detail::checked_llt(corr_, "spatial correlation matrix");
  }

  Eigen::MatrixXd correlation(double h) const {
    Eigen::MatrixXd c = (-sqdist_ / (2.0 * h * h)).array().exp().matrix();
    c.diagonal().array() += jitter_;
    return c;
  }

  double h() const { return h_; }
  const Eigen::MatrixXd& corr() const { return corr_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }
  Eigen::Index size() const { return sqdist_.rows(); }

 private:
  double jitter_;
  double h_ = 0.0;
  Eigen::MatrixXd sqdist_;
  Eigen::MatrixXd corr_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {

/// Residual excluding the field: y - X beta - alpha.
inline Eigen::VectorXd field_residual(const ChainState& st, const Dataset& data) {
  Eigen::VectorXd r = data.y - data.X * st.beta;
  if (st.has_alpha) r.array() -= st.hs.alpha;
  return r;
}

/// B = I + Lambda^{1/2} K Lambda^{1/2} with K = kappa^2 C and Lambda = sigma^{-2} D.
inline Eigen::LLT<Eigen::MatrixXd> field_b_factor(const Eigen::MatrixXd& corr, double kappa2,
                                                  const Eigen::VectorXd& sqrt_lambda) {
  Eigen::MatrixXd b = kappa2 * (sqrt_lambda.asDiagonal() * corr * sqrt_lambda.asDiagonal());
  b.diagonal().array() += 1.0;
  return checked_llt(b, "spatial field system");
}

}  // namespace detail

/// Mean and covariance of eta | rest: precision kappa^{-2} C^{-1} + Lambda and
/// mean driven by Lambda r, evaluated as
///   mean = K L B^{-1} L r,  cov = K - K L B^{-1} L K,  L = Lambda^{1/2}.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> spatial_field_moments(const ChainState& st, const Dataset& data,
                                                                         const SpatialCache& cache) {
  const Eigen::VectorXd sl = (st.precision_weights() / st.sigma2).cwiseSqrt();
  const auto bf = detail::field_b_factor(cache.corr(), st.kappa2, sl);
  const Eigen::MatrixXd k = st.kappa2 * cache.corr();
  const Eigen::MatrixXd lk = sl.asDiagonal() * k;
  const Eigen::VectorXd mean = lk.transpose() * bf.solve(sl.cwiseProduct(detail::field_residual(st, data)));
  const Eigen::MatrixXd cov = k - lk.transpose() * bf.solve(lk);
  return {mean, cov};
}

/// Joint draw of eta by prior sampling plus a data-space correction:
///   eta = eta0 + K L B^{-1} (L r - L eta0 - e),  eta0 ~ N(0, K), e ~ N(0, I)
/// which has the conditional law above without ever inverting C.
inline Eigen::VectorXd update_spatial_field(const ChainState& st, const Dataset& data, const SpatialCache& cache,
                                           RngStream& rng) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd sl = (st.precision_weights() / st.sigma2).cwiseSqrt();
  const auto bf = detail::field_b_factor(cache.corr(), st.kappa2, sl);
  const double kappa = std::sqrt(st.kappa2);
  const Eigen::VectorXd z0 = detail::standard_normals(rng, n);
  const Eigen::VectorXd eta0 = kappa * (cache.llt().matrixL() * z0).eval();
  const Eigen::VectorXd e = detail::standard_normals(rng, n);
  const Eigen::VectorXd r = detail::field_residual(st, data);
  const Eigen::VectorXd corr_rhs = bf.solve(sl.cwiseProduct(r - eta0) - e);
  return eta0 + st.kappa2 * (cache.corr() * sl.cwiseProduct(corr_rhs));
}

/// log N(r; 0, K + Lambda^{-1}) up to a constant free of h and kappa^2:
///   -1/2 (L r)' B^{-1} (L r) - log det chol(B).
inline double spatial_log_marginal(const ChainState& st, const Dataset& data, const Eigen::MatrixXd& corr) {
  const Eigen::VectorXd sl = (st.precision_weights() / st.sigma2).cwiseSqrt();
  const auto bf = detail::field_b_factor(corr, st.kappa2, sl);
  const Eigen::VectorXd q = sl.cwiseProduct(detail::field_residual(st, data));
  const Eigen::MatrixXd lower = bf.matrixL();
  return -0.5 * q.dot(bf.solve(q)) - lower.diagonal().array().log().sum();
}

/// Reflects a proposal into (0, h_max).
inline double reflect_into(double h, double h_max) {
  for (int k = 0; k < 64 && (h <= 0.0 || h >= h_max); ++k) {
    if (h <= 0.0) h = -h;
    if (h >= h_max) h = 2.0 * h_max - h;
  }
  if (h <= 0.0 || h >= h_max) h = 0.5 * h_max;
  return h;
}

/// kappa^2 | eta ~ IG(a_kappa + n/2, b_kappa + eta' C^{-1} eta / 2).
inline double update_kappa2(const ChainState& st, const PriorConfig& prior, const SpatialCache& cache,
                            RngStream& rng) {
  const Eigen::VectorXd half = cache.llt().matrixL().solve(st.b);
  return rng.inv_gamma(prior.a_kappa + 0.5 * static_cast<double>(st.b.size()), prior.b_kappa + 0.5 * half.squaredNorm());
}

/// kappa^2 by its conjugate draw, then one reflected random-walk MH step on
/// h with eta integrated out. The cache follows an accepted h. Returns
/// whether the h proposal was accepted.
inline bool update_gp_hyper(ChainState& st, const Dataset& data, const PriorConfig& prior, double h_max,
                            SpatialCache& cache, RngStream& rng) {
  st.kappa2 = clamp_scale(update_kappa2(st, prior, cache, rng));
  const double step = prior.mh_step.value_or(0.1 * h_max);
  const double proposal = reflect_into(st.h + step * rng.normal(), h_max);
  const Eigen::MatrixXd corr_new = cache.correlation(proposal);
  const double log_ratio = spatial_log_marginal(st, data, corr_new) - spatial_log_marginal(st, data, cache.corr());
  if (std::log(rng.uniform()) < log_ratio) {
    st.h = proposal;
    cache.set_h(proposal);
    return true;
  }
  return false;
}

}  // namespace ehreg
