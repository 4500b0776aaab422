#pragma once

// Synthetic data designs: linear regression with location-shift
// contamination, the random-intercept panel, and a spatial housing-style
// design with planted gross outliers.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"

namespace ehreg {

/// Contamination scenario: errors from (1-omega) N(0,1) + omega N(mu,1).
struct Scenario {
  double omega = 0.0;
  double mu = 0.0;

  /// Table label "(100 omega, mu)", with "--" for mu when omega = 0.
  std::string label() const {
    const int w = static_cast<int>(std::lround(100.0 * omega));
    if (omega == 0.0) return "(0, --)";
    std::string m = std::to_string(mu);
    m.erase(m.find_last_not_of('0') + 1);
    if (m.back() == '.') m.pop_back();
    return "(" + std::to_string(w) + ", " + m + ")";
  }
};

/// The nine scenarios: no contamination, and omega in {0.05, 0.1} x mu in {5, 10, 15, 20}.
inline std::vector<Scenario> standard_scenarios() {
  std::vector<Scenario> s{{0.0, 0.0}};
  for (double w : {0.05, 0.1}) {
    for (double m : {5.0, 10.0, 15.0, 20.0}) s.push_back({w, m});
  }
  return s;
}

/// Parses "omega,mu" (omega as a fraction) or the "(100 omega, mu)" short form "10,20".
inline Scenario parse_scenario(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) {
      const double w = std::stod(text);
      if (w != 0.0) throw ValidationError({"scenario '" + text + "' needs a shift: omega,mu"});
      return {};
    }
    double w = std::stod(text.substr(0, comma));
    const std::string rest = text.substr(comma + 1);
    const double m = rest == "--" || rest.empty() ? 0.0 : std::stod(rest);
    if (w >= 1.0) w /= 100.0;
    if (!(w >= 0.0 && w < 1.0)) throw ValidationError({"contamination ratio must lie in [0, 1)"});
    return {w, m};
  } catch (const std::invalid_argument&) {
    throw ValidationError({"cannot parse scenario '" + text + "'"});
  }
}

/// Linear design: intercept plus p covariates drawn from N(0, R) with
/// R_{kl} = rho^{|k-l|}.
struct LinearDesign {
  int n = 300;
  int p = 20;
  double rho = 0.2;
  double sigma = 0.5;
  int n_test = 20;
  Eigen::VectorXd beta;  // length p + 1 (intercept first); empty means the default truth

  Eigen::VectorXd truth() const {
    if (beta.size() > 0) return beta;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
    b[0] = 0.5;
    if (p >= 1) b[1] = 0.3;
    if (p >= 4) b[4] = 0.3;
    if (p >= 7) b[7] = 2.0;
    if (p >= 10) b[10] = 2.0;
    return b;
  }
};

struct SimulatedData {
  Dataset train;
  Dataset test;  // held-out rows with uncontaminated errors
  Eigen::VectorXd truth;
  std::vector<int> outlier;  // 1 if the training error came from the shifted component
  Eigen::VectorXd effects;   // true random intercepts (random-intercept design)
};

inline std::vector<std::string> design_names(int p) {
  std::vector<std::string> names{"intercept"};
  for (int k = 1; k <= p; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

/// Rows of [1, x] with x ~ N(0, R).
inline Eigen::MatrixXd simulate_covariates(int n, int p, double rho, RngStream& rng) {
  Eigen::MatrixXd r(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l < p; ++l) r(k, l) = std::pow(rho, std::abs(k - l));
  }
  const Eigen::MatrixXd chol = detail::checked_llt(r, "covariate correlation").matrixL();
  Eigen::MatrixXd x(n, p + 1);
  x.col(0).setOnes();
  for (int i = 0; i < n; ++i) x.row(i).tail(p) = (chol * detail::standard_normals(rng, p)).transpose();
  return x;
}

/// Error from the location-shift mixture; `shifted` reports the component.
inline double contaminated_error(const Scenario& sc, RngStream& rng, int& shifted) {
  shifted = sc.omega > 0.0 && rng.uniform() < sc.omega ? 1 : 0;
  return rng.normal() + (shifted ? sc.mu : 0.0);
}

inline SimulatedData simulate_linear(const LinearDesign& design, const Scenario& sc, RngStream& rng) {
  SimulatedData s;
  s.truth = design.truth();
  if (s.truth.size() != design.p + 1) throw ValidationError({"truth must have p + 1 entries"});
  const auto names = design_names(design.p);
  s.train.X = simulate_covariates(design.n, design.p, design.rho, rng);
  s.train.y.resize(design.n);
  s.outlier.resize(static_cast<std::size_t>(design.n));
  for (int i = 0; i < design.n; ++i) {
    s.train.y[i] = s.train.X.row(i).dot(s.truth) + design.sigma * contaminated_error(sc, rng, s.outlier[static_cast<std::size_t>(i)]);
  }
  s.train.covariate_names = names;
  s.test.X = simulate_covariates(design.n_test, design.p, design.rho, rng);
  s.test.y = s.test.X * s.truth;
  for (int i = 0; i < design.n_test; ++i) s.test.y[i] += design.sigma * rng.normal();
  s.test.covariate_names = names;
  return s;
}

/// Random-intercept panel y_jt = x_jt' beta + v_j + sigma eps_jt with
/// v_j ~ N(0, tau_v^2).
struct RandomInterceptDesign {
  int m = 50;
  int T = 10;
  int p = 10;
  double rho = 0.2;
  double sigma = 1.0;
  double tau_v2 = 0.25;
};

inline SimulatedData simulate_random_intercept(const RandomInterceptDesign& design, const Scenario& sc,
                                               RngStream& rng) {
  LinearDesign lin;
  lin.p = design.p;
  SimulatedData s;
  s.truth = lin.truth();
  const int n = design.m * design.T;
  s.train.X = simulate_covariates(n, design.p, design.rho, rng);
  s.train.covariate_names = design_names(design.p);
  s.effects.resize(design.m);
  for (int j = 0; j < design.m; ++j) s.effects[j] = std::sqrt(design.tau_v2) * rng.normal();
  s.train.y.resize(n);
  s.outlier.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < design.m; ++j) {
    for (int t = 0; t < design.T; ++t) {
      const int i = j * design.T + t;
      s.train.groups.push_back(j);
      s.train.y[i] = s.train.X.row(i).dot(s.truth) + s.effects[j] +
                     design.sigma * contaminated_error(sc, rng, s.outlier[static_cast<std::size_t>(i)]);
    }
  }
  return s;
}

/// Housing-style spatial design: n sites uniform on the unit square,
/// p_cont standardized covariates with their squares plus one binary
/// covariate (p = 2 p_cont + 1 plus an intercept), a smooth spatial field,
/// normal errors and a fraction of gross positive outliers.
struct SpatialDesign {
  int n = 506;
  int p_cont = 14;
  double sigma = 0.5;
  double field_sd = 1.0;
  double bandwidth = 0.2;
  double outlier_fraction = 0.05;
  double outlier_shift = 8.0;
};

inline SimulatedData simulate_spatial(const SpatialDesign& design, RngStream& rng) {
  const int n = design.n;
  const int pc = design.p_cont;
  const int p = 2 * pc + 1;
  SimulatedData s;
  s.train.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    s.train.coords(i, 0) = rng.uniform();
    s.train.coords(i, 1) = rng.uniform();
  }
  const Eigen::MatrixXd base = simulate_covariates(n, pc, 0.3, rng).rightCols(pc);
  Eigen::MatrixXd x(n, p + 1);
  x.col(0).setOnes();
  x.block(0, 1, n, pc) = base;
  x.block(0, 1 + pc, n, pc) = base.array().square().matrix().rowwise() - base.array().square().colwise().mean().matrix();
  for (int i = 0; i < n; ++i) x(i, p) = rng.uniform() < 0.1 ? 1.0 : 0.0;
  s.train.X = x;
  std::vector<std::string> names{"intercept"};
  for (int k = 1; k <= pc; ++k) names.push_back("x" + std::to_string(k));
  for (int k = 1; k <= pc; ++k) names.push_back("x" + std::to_string(k) + "_sq");
  names.push_back("binary");
  s.train.covariate_names = names;

  s.truth = Eigen::VectorXd::Zero(p + 1);
  s.truth[0] = 2.0;
  for (int k = 1; k <= pc; k += 3) s.truth[k] = k % 2 ? 0.8 : -0.6;
  s.truth[1 + pc] = 0.4;
  s.truth[p] = 1.0;

  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d2 = (s.train.coords.row(i) - s.train.coords.row(j)).squaredNorm();
      c(i, j) = std::exp(-d2 / (2.0 * design.bandwidth * design.bandwidth));
    }
  }
  c.diagonal().array() += 1e-6;
  const Eigen::MatrixXd lc = detail::checked_llt(c, "spatial design covariance").matrixL();
  s.effects = design.field_sd * (lc * detail::standard_normals(rng, n));

  s.train.y = x * s.truth + s.effects;
  s.outlier.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    s.train.y[i] += design.sigma * rng.normal();
    if (rng.uniform() < design.outlier_fraction) {
      s.outlier[static_cast<std::size_t>(i)] = 1;
      s.train.y[i] += design.outlier_shift * (1.0 + rng.uniform());
    }
  }
  return s;
}

}  // namespace ehreg
