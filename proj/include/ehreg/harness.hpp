#pragma once

// Replicated simulation experiments: simulate, fit every model, score,
// aggregate, and lay the results out as text tables.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ehreg/errors.hpp"
#include "ehreg/gibbs.hpp"
#include "ehreg/metrics.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/simulate.hpp"

namespace ehreg {

/// A named model: CLI flag plus the prior it runs with.
struct ModelChoice {
  std::string flag;
  ModelSpec spec;
  PriorConfig prior;
};

inline ModelChoice model_choice(const std::string& flag, const PriorConfig& base, RandomEffectKind effects =
                                                                                     RandomEffectKind::none) {
  ModelChoice c;
  c.flag = flag;
  c.prior = base;
  c.spec = parse_model_flag(flag, c.prior);
  c.spec.effects.kind = effects;
  return c;
}

/// Default simulation prior: beta_k ~ N(0, 1000), sigma^{-2} ~ Ga(1, 1).
inline PriorConfig simulation_prior() { return PriorConfig{}; }

struct ModelScore {
  std::string model;
  MetricReport coef;
  double pred_cp = 0.0;  // predictive interval coverage of held-out rows
  double pred_al = 0.0;  // predictive interval length
  std::vector<double> rmspe_by_rep;
  int failures = 0;
};

struct ReplicationPlan {
  Scenario scenario;
  std::vector<ModelChoice> models;
  int reps = 50;
  std::uint64_t seed = 1;
  McmcOptions mcmc;
};

/// Seed of replication r: the r-th child of the plan seed.
inline std::uint64_t replication_seed(std::uint64_t seed, int r) { return derive_seed(seed, static_cast<std::uint64_t>(r)); }

/// Linear-design replications. Each replication simulates one dataset and
/// fits every model with the same chain seed. A replication whose chain
/// fails numerically is logged in `failures` and excluded.
inline std::vector<ModelScore> replicate_linear(const ReplicationPlan& plan, const LinearDesign& design = {}) {
  if (plan.reps < 2) throw ValidationError({"replicate needs at least 2 replications"});
  const std::size_t nm = plan.models.size();
  std::vector<std::vector<CoefficientFit>> fits(nm);
  std::vector<ModelScore> scores(nm);
  std::vector<double> cp(nm, 0.0), al(nm, 0.0);
  for (std::size_t k = 0; k < nm; ++k) scores[k].model = plan.models[k].flag;
  for (int r = 0; r < plan.reps; ++r) {
    const std::uint64_t rs = replication_seed(plan.seed, r);
    RngStream data_rng = RngStream(rs).child(0);
    const SimulatedData sim = simulate_linear(design, plan.scenario, data_rng);
    for (std::size_t k = 0; k < nm; ++k) {
      McmcOptions mc = plan.mcmc;
      mc.seed = derive_seed(rs, 1);
      try {
        const ValidatedModel vm = validate(plan.models[k].prior, plan.models[k].spec, sim.train);
        const ChainOutput out = run_model(vm, mc);
        fits[k].push_back(coefficient_fit(out.at("beta"), sim.truth));
        RngStream pred_rng = RngStream(rs).child(2 + k);
        const Predictive pred = predict_clean(out, sim.test.X, pred_rng);
        double c = 0.0;
        for (Eigen::Index j = 0; j < sim.test.y.size(); ++j) {
          c += (sim.test.y[j] >= pred.lower[j] && sim.test.y[j] <= pred.upper[j]) ? 1.0 : 0.0;
        }
        cp[k] += c / static_cast<double>(sim.test.y.size());
        al[k] += (pred.upper - pred.lower).mean();
      } catch (const NumericError&) {
        ++scores[k].failures;
      }
    }
  }
  for (std::size_t k = 0; k < nm; ++k) {
    if (fits[k].empty()) throw NumericError("all replications failed for model " + plan.models[k].flag);
    scores[k].coef = aggregate(fits[k]);
    const double ok = static_cast<double>(fits[k].size());
    scores[k].pred_cp = cp[k] / ok;
    scores[k].pred_al = al[k] / ok;
  }
  return scores;
}

/// Random-intercept replications; also records the per-replication RMSPE of
/// the predicted intercepts.
inline std::vector<ModelScore> replicate_random_intercept(const ReplicationPlan& plan,
                                                          const RandomInterceptDesign& design = {}) {
  if (plan.reps < 2) throw ValidationError({"replicate needs at least 2 replications"});
  const std::size_t nm = plan.models.size();
  std::vector<std::vector<CoefficientFit>> fits(nm);
  std::vector<std::vector<double>> rmspes(nm);
  std::vector<ModelScore> scores(nm);
  for (std::size_t k = 0; k < nm; ++k) scores[k].model = plan.models[k].flag;
  for (int r = 0; r < plan.reps; ++r) {
    const std::uint64_t rs = replication_seed(plan.seed, r);
    RngStream data_rng = RngStream(rs).child(0);
    const SimulatedData sim = simulate_random_intercept(design, plan.scenario, data_rng);
    for (std::size_t k = 0; k < nm; ++k) {
      McmcOptions mc = plan.mcmc;
      mc.seed = derive_seed(rs, 1);
      ModelSpec spec = plan.models[k].spec;
      spec.effects.kind = RandomEffectKind::intercept;
      try {
        const ChainOutput out = run_model(validate(plan.models[k].prior, spec, sim.train), mc);
        fits[k].push_back(coefficient_fit(out.at("beta"), sim.truth));
        rmspes[k].push_back(rmspe(summarize_mean(out.at("b")), sim.effects));
      } catch (const NumericError&) {
        ++scores[k].failures;
        rmspes[k].push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
  }
  for (std::size_t k = 0; k < nm; ++k) {
    if (fits[k].empty()) throw NumericError("all replications failed for model " + plan.models[k].flag);
    scores[k].coef = aggregate(fits[k]);
    scores[k].rmspe_by_rep = rmspes[k];
    double s = 0.0;
    int c = 0;
    for (double v : rmspes[k]) {
      if (std::isfinite(v)) {
        s += v;
        ++c;
      }
    }
    scores[k].coef.rmspe = s / c;
  }
  return scores;
}

/// Aligned text table: one block per measure, one row per scenario, one
/// column per model. All values except IF are multiplied by 100.
inline std::string format_table(const std::vector<Scenario>& scenarios,
                                const std::vector<std::vector<ModelScore>>& results) {
  if (results.empty()) return "";
  std::ostringstream os;
  const auto& models = results.front();
  os << std::left << std::setw(8) << "" << std::setw(10) << "scenario";
  for (const auto& m : models) os << std::right << std::setw(10) << m.model;
  os << "\n";
  struct Measure {
    const char* name;
    double (*get)(const ModelScore&);
  };
  const Measure measures[] = {
      {"RMSE", [](const ModelScore& s) { return 100.0 * s.coef.rmse; }},
      {"CP", [](const ModelScore& s) { return 100.0 * s.coef.cp; }},
      {"AL", [](const ModelScore& s) { return 100.0 * s.coef.al; }},
      {"IF", [](const ModelScore& s) { return s.coef.if_avg; }},
      {"PredCP", [](const ModelScore& s) { return 100.0 * s.pred_cp; }},
      {"PredAL", [](const ModelScore& s) { return 100.0 * s.pred_al; }},
  };
  for (const auto& ms : measures) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      os << std::left << std::setw(8) << (i == 0 ? ms.name : "") << std::setw(10) << scenarios[i].label();
      for (const auto& s : results[i]) os << std::right << std::setw(10) << std::fixed << std::setprecision(2) << ms.get(s);
      os << "\n";
    }
  }
  return os.str();
}

inline nlohmann::json to_json(const ModelScore& s) {
  nlohmann::json j;
  j["model"] = s.model;
  j["rmse"] = s.coef.rmse;
  j["cp"] = s.coef.cp;
  j["al"] = s.coef.al;
  j["if"] = s.coef.if_avg;
  j["pred_cp"] = s.pred_cp;
  j["pred_al"] = s.pred_al;
  j["replications"] = s.coef.replications;
  j["failures"] = s.failures;
  if (s.coef.rmspe) j["rmspe"] = *s.coef.rmspe;
  return j;
}

}  // namespace ehreg
