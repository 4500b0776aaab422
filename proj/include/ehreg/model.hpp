#pragma once

// Data, priors, model variants and the latent state shared by all samplers.

#include <Eigen/Dense>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ehreg/errors.hpp"

namespace ehreg {

/// Responses, fixed-effect design and the optional random-effect structure.
/// Random intercepts are given by a group index per row; the design matrix
/// of the random effects is the corresponding n x m indicator matrix.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> covariate_names;
  std::vector<int> groups;
  Eigen::MatrixXd coords;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }
  bool has_groups() const { return !groups.empty(); }
  bool has_coords() const { return coords.size() > 0; }
  int num_groups() const { return groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1; }

  /// Copy keeping only the listed rows (in order).
  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.covariate_names = covariate_names;
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.X.resize(out.y.size(), X.cols());
    if (has_coords()) out.coords.resize(out.y.size(), coords.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto i = rows[k];
      const auto r = static_cast<Eigen::Index>(k);
      out.y[r] = y[i];
      out.X.row(r) = X.row(i);
      if (has_groups()) out.groups.push_back(groups[static_cast<std::size_t>(i)]);
      if (has_coords()) out.coords.row(r) = coords.row(i);
    }
    return out;
  }
};

enum class BetaPrior { normal, horseshoe };

/// Fixed gamma, or a Ga(a, b) prior on it (the adaptive variant).
struct GammaMode {
  bool adaptive = false;
  double value = 1.0;
  double a = 100.0;
  double b = 100.0;
};

/// Hyperparameters. Vectors A_beta/B_beta left empty mean N(0, beta_variance I)
/// sized to the design at validation.
struct PriorConfig {
  BetaPrior beta_prior = BetaPrior::normal;
  Eigen::VectorXd A_beta;
  Eigen::MatrixXd B_beta;
  double beta_variance = 1000.0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  double a_s = 1.0;
  double b_s = 1.0;
  std::optional<double> fixed_s;
  GammaMode gamma;
  double A_alpha = 1000.0;
  double a_v = 1.0;
  double b_v = 1.0;
  double a_kappa = 1.0;
  double b_kappa = 1.0;
  std::optional<double> mh_step;  // default 0.1 h_M
};

enum class ErrorKind { normal, student_t, adaptive_t, eh, mt };

/// Error distribution of the regression. nu is the t degrees of freedom
/// (student_t) or the t component of MT; nu_grid is the support of the
/// discrete uniform prior for adaptive_t.
struct ErrorModel {
  ErrorKind kind = ErrorKind::eh;
  double nu = 3.0;
  std::vector<double> nu_grid{1, 2, 3, 4, 5, 8, 10, 15, 20, 30, 50};

  static ErrorModel eh() { return {}; }
  static ErrorModel normal() { return {ErrorKind::normal, 3.0, {}}; }
  static ErrorModel t(double nu) { return {ErrorKind::student_t, nu, {}}; }
  static ErrorModel adaptive_t(std::vector<double> grid = {1, 2, 3, 4, 5, 8, 10, 15, 20, 30, 50}) {
    const double first = grid.empty() ? 1.0 : grid.front();
    return {ErrorKind::adaptive_t, first, std::move(grid)};
  }
  static ErrorModel mt(double nu = 0.5) { return {ErrorKind::mt, nu, {}}; }

  bool is_mixture() const { return kind == ErrorKind::eh || kind == ErrorKind::mt; }
  bool uses_scales() const { return kind != ErrorKind::normal; }
};

enum class RandomEffectKind { none, intercept, spatial };

/// Random-effect structure: per-group intercepts with variance tau_v^2, or a
/// Gaussian-process field eta ~ N(0, kappa^2 C(h)) with squared-exponential
/// C(h)_{ij} = exp(-|s_i - s_j|^2 / 2h^2) plus jitter on the diagonal.
struct RandomEffectSpec {
  RandomEffectKind kind = RandomEffectKind::none;
  double jitter = 1e-8;
};

struct ModelSpec {
  ErrorModel error;
  RandomEffectSpec effects;

  /// Tag of the CLI model flag family: eh, aeh, normal, t:<nu>, at, mt.
  std::string tag(const PriorConfig& prior) const {
    switch (error.kind) {
      case ErrorKind::normal: return "normal";
      case ErrorKind::student_t: {
        std::string s = std::to_string(error.nu);
        s.erase(s.find_last_not_of('0') + 1);
        if (s.back() == '.') s.pop_back();
        return "t:" + s;
      }
      case ErrorKind::adaptive_t: return "at";
      case ErrorKind::eh: return prior.gamma.adaptive ? "aeh" : "eh";
      case ErrorKind::mt: return "mt";
    }
    return "?";
  }
};

/// Parses a model flag. "aeh" also switches the prior to adaptive gamma.
inline ModelSpec parse_model_flag(std::string_view flag, PriorConfig& prior) {
  ModelSpec spec;
  if (flag == "eh") {
    spec.error = ErrorModel::eh();
  } else if (flag == "aeh") {
    spec.error = ErrorModel::eh();
    prior.gamma.adaptive = true;
  } else if (flag == "normal" || flag == "n") {
    spec.error = ErrorModel::normal();
  } else if (flag == "at") {
    spec.error = ErrorModel::adaptive_t();
  } else if (flag == "mt" || flag.starts_with("mt:")) {
    spec.error = ErrorModel::mt(flag == "mt" ? 0.5 : std::stod(std::string(flag.substr(3))));
  } else if (flag.starts_with("t:")) {
    double nu = 0.0;
    try {
      nu = std::stod(std::string(flag.substr(2)));
    } catch (const std::exception&) {
      throw ValidationError({"invalid t degrees of freedom in model flag '" + std::string(flag) + "'"});
    }
    spec.error = ErrorModel::t(nu);
  } else {
    throw ValidationError({"unknown model flag '" + std::string(flag) + "' (expected eh, aeh, normal, t:<nu>, at, mt)"});
  }
  if (spec.error.kind == ErrorKind::student_t && !(spec.error.nu > 0.0)) {
    throw ValidationError({"t degrees of freedom must be positive"});
  }
  return spec;
}

/// Robustness probe: rows in `outliers` are moved to a_i + b_i * omega.
struct OutlierProbe {
  std::vector<Eigen::Index> outliers;
  std::vector<double> base;    // a_i; empty means the clean responses
  std::vector<double> slopes;  // b_i, nonzero
  double omega = 0.0;
};

/// Location-shift contamination (1-omega) N(0,1) + omega N(mu,1), plus an
/// optional planted-outlier probe.
struct OutlierScenario {
  double contamination_ratio = 0.0;
  double shift_mu = 0.0;
  std::optional<OutlierProbe> probe;
};

/// All latent and parameter values visited by a sweep. Blocks not used by
/// the active model keep their initial values and are never read.
///
/// Scale-mixture models share the weight D = diag(u_i^{-z_i}): Student-t
/// models hold z at 1 and the normal model holds z at 0.
struct HorseshoeState {
  double alpha = 0.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd lambda;
  double tau2 = 1.0;
  double nu = 1.0;
};

struct ChainState {
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
  Eigen::VectorXi z;
  Eigen::VectorXd u, v, w;
  // Exact logs of u and v. Read only where u sits at kMaxScale or v at
  // kMinScale, so code that sets u or v directly inside the bounds need not
  // touch them.
  Eigen::VectorXd log_u, log_v;
  double s = 0.5;
  double gamma = 1.0;
  double nu_t = 3.0;  // t degrees of freedom (adaptive_t)
  HorseshoeState hs;
  Eigen::VectorXd b;  // random intercepts (m) or spatial field (n)
  double tau_v2 = 1.0;
  double kappa2 = 1.0;
  double h = 1.0;

  bool has_alpha = false;
  RandomEffectKind effects = RandomEffectKind::none;

  /// Diagonal of D: u_i^{-z_i}.
  Eigen::VectorXd precision_weights() const {
    Eigen::VectorXd d(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) d[i] = z[i] ? 1.0 / u[i] : 1.0;
    return d;
  }

  /// alpha + G b for the active blocks (zero vector if none).
  Eigen::VectorXd offset(const Dataset& data) const {
    Eigen::VectorXd o = Eigen::VectorXd::Constant(data.n(), has_alpha ? hs.alpha : 0.0);
    if (effects == RandomEffectKind::intercept) {
      for (Eigen::Index i = 0; i < data.n(); ++i) o[i] += b[data.groups[static_cast<std::size_t>(i)]];
    } else if (effects == RandomEffectKind::spatial) {
      o += b;
    }
    return o;
  }

  /// y - X beta - offset.
  Eigen::VectorXd residuals(const Dataset& data) const { return data.y - data.X * beta - offset(data); }
};

/// Retained draws of one chain. Every matrix in `draws` has retained() rows.
struct ChainOutput {
  std::map<std::string, Eigen::MatrixXd> draws;
  std::vector<std::string> order;                            // block order for CSV output
  std::map<std::string, std::vector<std::string>> labels;  // column labels per block
  int n_iter = 0;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  std::string model_tag;
  Eigen::VectorXd z_mean;  // posterior P(z_i = 1), mixture models only
  double mh_acceptance = 0.0;

  Eigen::Index retained() const { return (n_iter - burn_in) / thin; }
  bool has(const std::string& name) const { return draws.count(name) != 0; }
  const Eigen::MatrixXd& at(const std::string& name) const {
    auto it = draws.find(name);
    if (it == draws.end()) throw std::out_of_range("ChainOutput: no block '" + name + "'");
    return it->second;
  }
  /// Single-column block as a vector.
  Eigen::VectorXd scalar(const std::string& name) const { return at(name).col(0); }

  /// Flattened column names "block[label]" (or "block" for scalars), in order.
  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& name : order) {
      const auto& lab = labels.at(name);
      if (lab.size() == 1 && lab[0].empty()) {
        out.push_back(name);
      } else {
        for (const auto& l : lab) out.push_back(name + "[" + l + "]");
      }
    }
    return out;
  }
};

struct McmcOptions {
  int n_iter = 4000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool record_latent = false;
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PriorConfig& p) {
  nlohmann::json j;
  j["beta_prior"] = p.beta_prior == BetaPrior::horseshoe ? "horseshoe" : "normal";
  j["beta_variance"] = p.beta_variance;
  if (p.A_beta.size() > 0) j["A_beta"] = std::vector<double>(p.A_beta.data(), p.A_beta.data() + p.A_beta.size());
  if (p.B_beta.size() > 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.B_beta.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(p.B_beta.cols()));
      for (Eigen::Index k = 0; k < p.B_beta.cols(); ++k) r[static_cast<std::size_t>(k)] = p.B_beta(i, k);
      rows.push_back(r);
    }
    j["B_beta"] = rows;
  }
  j["a_sigma"] = p.a_sigma;
  j["b_sigma"] = p.b_sigma;
  j["a_s"] = p.a_s;
  j["b_s"] = p.b_s;
  if (p.fixed_s) j["fixed_s"] = *p.fixed_s;
  j["gamma_adaptive"] = p.gamma.adaptive;
  j["gamma"] = p.gamma.value;
  j["a_gamma"] = p.gamma.a;
  j["b_gamma"] = p.gamma.b;
  j["A_alpha"] = p.A_alpha;
  j["a_v"] = p.a_v;
  j["b_v"] = p.b_v;
  j["a_kappa"] = p.a_kappa;
  j["b_kappa"] = p.b_kappa;
  if (p.mh_step) j["mh_step"] = *p.mh_step;
  return j;
}

/// Reads a flat JSON object; absent keys keep their defaults, unknown keys are rejected.
inline PriorConfig prior_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"beta_prior", "beta_variance", "A_beta", "B_beta", "a_sigma",
                                           "b_sigma",    "a_s",           "b_s",    "fixed_s", "gamma_adaptive",
                                           "gamma",      "a_gamma",       "b_gamma", "A_alpha", "a_v",
                                           "b_v",        "a_kappa",       "b_kappa", "mh_step"};
  if (!j.is_object()) throw ValidationError({"prior config must be a JSON object"});
  std::vector<std::string> bad;
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) bad.push_back("unknown prior key '" + k + "'");
  }
  if (!bad.empty()) throw ValidationError(bad);
  PriorConfig p;
  try {
    if (j.contains("beta_prior")) {
      const auto s = j.at("beta_prior").get<std::string>();
      if (s == "horseshoe") p.beta_prior = BetaPrior::horseshoe;
      else if (s == "normal") p.beta_prior = BetaPrior::normal;
      else throw ValidationError({"beta_prior must be 'normal' or 'horseshoe'"});
    }
    auto num = [&](const char* key, double& dst) {
      if (j.contains(key)) dst = j.at(key).get<double>();
    };
    num("beta_variance", p.beta_variance);
    if (j.contains("A_beta")) {
      const auto v = j.at("A_beta").get<std::vector<double>>();
      p.A_beta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (j.contains("B_beta")) {
      const auto rows = j.at("B_beta").get<std::vector<std::vector<double>>>();
      const auto r = static_cast<Eigen::Index>(rows.size());
      p.B_beta.resize(r, r);
      for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != r) {
          throw ValidationError({"B_beta must be square"});
        }
        for (Eigen::Index k = 0; k < r; ++k) p.B_beta(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      }
    }
    num("a_sigma", p.a_sigma);
    num("b_sigma", p.b_sigma);
    num("a_s", p.a_s);
    num("b_s", p.b_s);
    if (j.contains("fixed_s")) p.fixed_s = j.at("fixed_s").get<double>();
    if (j.contains("gamma_adaptive")) p.gamma.adaptive = j.at("gamma_adaptive").get<bool>();
    num("gamma", p.gamma.value);
    num("a_gamma", p.gamma.a);
    num("b_gamma", p.gamma.b);
    num("A_alpha", p.A_alpha);
    num("a_v", p.a_v);
    num("b_v", p.b_v);
    num("a_kappa", p.a_kappa);
    num("b_kappa", p.b_kappa);
    if (j.contains("mh_step")) p.mh_step = j.at("mh_step").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({std::string("malformed prior config: ") + e.what()});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Model checked against its data. Priors are completed (A_beta, B_beta
/// sized to the design) and derived constants (h_M) computed.
struct ValidatedModel {
  Dataset data;
  PriorConfig prior;
  ModelSpec spec;
  double h_max = 0.0;  // median pairwise distance (spatial only)
  std::vector<std::string> warnings;

  std::string tag() const { return spec.tag(prior); }
};

/// Median of all pairwise Euclidean distances between rows of coords.
inline double median_pairwise_distance(const Eigen::MatrixXd& coords) {
  std::vector<double> d;
  const Eigen::Index n = coords.rows();
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((coords.row(i) - coords.row(j)).norm());
  }
  if (d.empty()) return 0.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

inline ValidatedModel validate(const PriorConfig& prior, const ModelSpec& spec, const Dataset& data,
                               const std::optional<OutlierProbe>& probe = std::nullopt) {
  std::vector<std::string> errs;
  std::vector<std::string> warns;
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (n < 1) errs.push_back("dataset has no observations");
  if (data.X.rows() != n) errs.push_back("design matrix has " + std::to_string(data.X.rows()) + " rows, expected " + std::to_string(n));
  if (!data.y.allFinite() || !data.X.allFinite()) errs.push_back("data contain non-finite values");
  if (!data.covariate_names.empty() && static_cast<Eigen::Index>(data.covariate_names.size()) != p) {
    errs.push_back("covariate name count does not match design columns");
  }

  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) errs.push_back(std::string(name) + " must be positive");
  };
  positive(prior.a_sigma, "a_sigma");
  positive(prior.b_sigma, "b_sigma");
  positive(prior.a_s, "a_s");
  positive(prior.b_s, "b_s");
  positive(prior.gamma.value, "gamma");
  positive(prior.gamma.a, "a_gamma");
  positive(prior.gamma.b, "b_gamma");
  positive(prior.A_alpha, "A_alpha");
  positive(prior.a_v, "a_v");
  positive(prior.b_v, "b_v");
  positive(prior.a_kappa, "a_kappa");
  positive(prior.b_kappa, "b_kappa");
  if (prior.mh_step) positive(*prior.mh_step, "mh_step");
  if (prior.fixed_s && !(*prior.fixed_s >= 0.0 && *prior.fixed_s <= 1.0)) errs.push_back("fixed_s must lie in [0, 1]");

  const auto& err = spec.error;
  if (err.kind == ErrorKind::student_t || err.kind == ErrorKind::mt) positive(err.nu, "nu");
  if (err.kind == ErrorKind::adaptive_t) {
    if (err.nu_grid.empty()) errs.push_back("adaptive t requires a nonempty nu grid");
    for (double v : err.nu_grid) positive(v, "nu grid value");
  }

  PriorConfig completed = prior;
  if (prior.beta_prior == BetaPrior::normal) {
    positive(prior.beta_variance, "beta_variance");
    if (completed.A_beta.size() == 0) completed.A_beta = Eigen::VectorXd::Zero(p);
    if (completed.B_beta.size() == 0) completed.B_beta = prior.beta_variance * Eigen::MatrixXd::Identity(p, p);
    if (completed.A_beta.size() != p) errs.push_back("A_beta has length " + std::to_string(completed.A_beta.size()) + ", expected " + std::to_string(p));
    if (completed.B_beta.rows() != p || completed.B_beta.cols() != p) {
      errs.push_back("B_beta must be " + std::to_string(p) + "x" + std::to_string(p));
    } else if (p > 0) {
      if (!completed.B_beta.isApprox(completed.B_beta.transpose(), 1e-12)) errs.push_back("B_beta is not symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(completed.B_beta);
      if (llt.info() != Eigen::Success) errs.push_back("B_beta is not positive definite");
    }
  }

  if (n >= 1 && p > 0 && data.X.rows() == n) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.X);
    if (qr.rank() < p) {
      std::string msg = "design matrix has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) + " columns";
      if (prior.beta_prior == BetaPrior::horseshoe) warns.push_back(msg);
      else errs.push_back(msg);
    }
  }

  double h_max = 0.0;
  switch (spec.effects.kind) {
    case RandomEffectKind::none:
      if (data.has_coords()) warns.push_back("coordinates supplied but no spatial effect requested; ignored");
      break;
    case RandomEffectKind::intercept: {
      if (static_cast<Eigen::Index>(data.groups.size()) != n) {
        errs.push_back("random intercept model needs one group index per row");
      } else {
        const int m = data.num_groups();
        std::vector<int> count(static_cast<std::size_t>(std::max(m, 0)), 0);
        for (int g : data.groups) {
          if (g < 0) errs.push_back("negative group index");
          else ++count[static_cast<std::size_t>(g)];
        }
        for (int g = 0; g < m; ++g) {
          if (count[static_cast<std::size_t>(g)] == 0) errs.push_back("group " + std::to_string(g) + " has no observations");
        }
      }
      break;
    }
    case RandomEffectKind::spatial: {
      if (data.coords.rows() != n || data.coords.cols() != 2) {
        errs.push_back("spatial model needs n x 2 coordinates");
      } else {
        for (Eigen::Index i = 0; i < n && errs.size() < 20; ++i) {
          for (Eigen::Index j = i + 1; j < n; ++j) {
            if ((data.coords.row(i) - data.coords.row(j)).squaredNorm() == 0.0) {
              errs.push_back("coordinates of rows " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
              break;
            }
          }
        }
        h_max = median_pairwise_distance(data.coords);
      }
      if (!(spec.effects.jitter > 0.0)) errs.push_back("spatial jitter must be positive");
      break;
    }
  }

  if (probe) {
    const auto l = static_cast<Eigen::Index>(probe->outliers.size());
    for (auto i : probe->outliers) {
      if (i < 0 || i >= n) errs.push_back("probe outlier index out of range");
    }
    for (double b : probe->slopes) {
      if (b == 0.0) errs.push_back("probe slopes must be nonzero");
    }
    if (static_cast<Eigen::Index>(probe->slopes.size()) != l) errs.push_back("probe needs one slope per outlier");
    if (!probe->base.empty() && static_cast<Eigen::Index>(probe->base.size()) != l) errs.push_back("probe needs one base value per outlier");
    const Eigen::Index k = n - l;
    if (k < l + p) {
      warns.push_back("(A.1) violated: " + std::to_string(k) + " non-outliers < " + std::to_string(l) + " outliers + " +
                      std::to_string(p) + " predictors");
    }
  }

  if (!errs.empty()) throw ValidationError(errs);
  return ValidatedModel{data, completed, spec, h_max, warns};
}

}  // namespace ehreg
