#pragma once

// Conditionals for the competitor error models: Student t with fixed or
// grid-adaptive degrees of freedom, and the normal + t two-component
// mixture (MT). Both are normal scale mixtures with u_i ~ IG(nu/2, nu/2);
// beta and sigma^2 reuse the EH updates through D = diag(u_i^{-z_i}).

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "ehreg/dist_core.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/sampler_eh.hpp"

namespace ehreg {

/// u_i | rest ~ IG((nu+1)/2, nu/2 + r_i^2 / (2 sigma^2)) for the t model.
inline Eigen::VectorXd update_u_t(const ChainState& st, const Dataset& data, double nu, RngStream& rng) {
  const Eigen::VectorXd r = st.residuals(data);
  Eigen::VectorXd u(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    u[i] = clamp_scale(rng.inv_gamma(0.5 * (nu + 1.0), 0.5 * nu + 0.5 * r[i] * r[i] / st.sigma2));
  }
  return u;
}

/// MT scales: the t conditional for z_i = 1, a fresh IG(nu/2, nu/2) prior draw for z_i = 0.
inline Eigen::VectorXd update_u_mt(const ChainState& st, const Dataset& data, double nu, RngStream& rng) {
  const Eigen::VectorXd r = st.residuals(data);
  Eigen::VectorXd u(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double scale = st.z[i] ? 0.5 * nu + 0.5 * r[i] * r[i] / st.sigma2 : 0.5 * nu;
    const double shape = st.z[i] ? 0.5 * (nu + 1.0) : 0.5 * nu;
    u[i] = clamp_scale(rng.inv_gamma(shape, scale));
  }
  return u;
}

/// log prod_i IG(u_i; nu/2, nu/2) for each grid value.
inline std::vector<double> nu_log_weights(const Eigen::VectorXd& u, const std::vector<double>& grid) {
  std::vector<double> lw(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double a = 0.5 * grid[g];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += log_inv_gamma_density(u[i], a, a);
    lw[g] = acc;
  }
  return lw;
}

/// Normalized discrete full conditional of nu under a uniform prior on the grid.
inline std::vector<double> nu_conditional(const Eigen::VectorXd& u, const std::vector<double>& grid) {
  auto lw = nu_log_weights(u, grid);
  const double hi = *std::max_element(lw.begin(), lw.end());
  double total = 0.0;
  for (double& x : lw) total += (x = std::exp(x - hi));
  for (double& x : lw) x /= total;
  return lw;
}

/// Discrete Gibbs draw of nu. A one-point grid returns its value without
/// touching the stream, so the chain coincides with the fixed-nu t chain.
inline double update_nu_grid(const ChainState& st, const std::vector<double>& grid, RngStream& rng) {
  if (grid.size() == 1) return grid.front();
  const auto prob = nu_conditional(st.u, grid);
  double c = rng.uniform();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    c -= prob[g];
    if (c <= 0.0) return grid[g];
  }
  return grid.back();
}

}  // namespace ehreg
