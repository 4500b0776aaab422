// ehreg: simulate, fit, replicate, robustness, predict, dic.
//
// Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
// 3 numeric failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ehreg/ehreg.hpp"

namespace {

using namespace ehreg;
using nlohmann::json;

struct Common {
  std::uint64_t seed = 1;
  int iters = 4000;
  int burnin = 1000;
  int thin = 1;
  std::string output;

  McmcOptions mcmc() const {
    McmcOptions m;
    m.n_iter = iters;
    m.burn_in = burnin;
    m.thin = thin;
    m.seed = seed;
    return m;
  }
};

void add_common(CLI::App* app, Common& c, bool chain = true) {
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  if (chain) {
    app->add_option("--iters", c.iters, "total MCMC iterations")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--burnin", c.burnin, "discarded iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--thin", c.thin, "keep every k-th draw")->capture_default_str()->check(CLI::PositiveNumber);
  }
  app->add_option("--output", c.output, "output path")->required();
}

// Data and prior flags shared by fit, robustness, predict and dic.
struct DataFlags {
  std::string data;
  std::string response = "y";
  std::vector<std::string> covariates;
  std::string group;
  std::vector<std::string> coords;
  std::string prior = "normal";
  std::string prior_config;
  double jitter = 1e-8;

  PriorConfig prior_config_value() const {
    PriorConfig p;
    if (!prior_config.empty()) {
      std::ifstream in(prior_config);
      if (!in) throw IoError("cannot open '" + prior_config + "'");
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw ValidationError({prior_config + ": " + e.what()});
      }
      p = prior_from_json(j);
    }
    if (prior == "horseshoe") p.beta_prior = BetaPrior::horseshoe;
    else if (prior == "normal" && prior_config.empty()) p.beta_prior = BetaPrior::normal;
    return p;
  }

  Dataset dataset(const PriorConfig& p) const {
    DatasetColumns cols;
    cols.response = response;
    cols.covariates = covariates;
    if (!group.empty()) cols.group = group;
    if (!coords.empty()) cols.coords = std::make_pair(coords.at(0), coords.at(1));
    // The horseshoe carries its own unpenalized intercept.
    cols.add_intercept = p.beta_prior != BetaPrior::horseshoe;
    if (!cols.add_intercept) cols.ignore.push_back("intercept");
    return dataset_from_table(read_csv(data), cols);
  }

  RandomEffectSpec effects() const {
    RandomEffectSpec e;
    e.jitter = jitter;
    if (!group.empty()) e.kind = RandomEffectKind::intercept;
    if (!coords.empty()) e.kind = RandomEffectKind::spatial;
    return e;
  }
};

void add_data_flags(CLI::App* app, DataFlags& d) {
  app->add_option("--data", d.data, "training CSV with header")->required();
  app->add_option("--response", d.response, "response column")->capture_default_str();
  app->add_option("--covariates", d.covariates, "covariate columns (default: all others)")->delimiter(',');
  app->add_option("--group", d.group, "group column for random intercepts");
  app->add_option("--coords", d.coords, "two coordinate columns for a spatial field")
      ->delimiter(',')
      ->expected(2);
  app->add_option("--prior", d.prior, "coefficient prior")
      ->check(CLI::IsMember({"normal", "horseshoe"}))
      ->capture_default_str();
  app->add_option("--prior-config", d.prior_config, "JSON file of hyperparameters");
  app->add_option("--jitter", d.jitter, "diagonal jitter of the spatial correlation")->capture_default_str();
}

ValidatedModel build_model(const DataFlags& d, const std::string& flag) {
  PriorConfig prior = d.prior_config_value();
  ModelSpec spec = parse_model_flag(flag, prior);
  spec.effects = d.effects();
  ValidatedModel m = validate(prior, spec, d.dataset(prior));
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  return m;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json summary_json(const ChainOutput& out, const ValidatedModel& m, double seconds) {
  const Eigen::MatrixXd draws = flatten_draws(out);
  const auto names = out.column_names();
  json cols = json::array();
  const bool summarizable = draws.rows() >= kMinSummaryDraws;
  const PosteriorSummary s = summarizable ? summarize(draws) : PosteriorSummary{};
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    json c;
    c["name"] = names[static_cast<std::size_t>(k)];
    c["mean"] = draws.col(k).mean();
    if (summarizable) {
      c["lower"] = s.lower[k];
      c["upper"] = s.upper[k];
    }
    if (draws.rows() >= kMinTraceLength) c["if"] = inefficiency_factor(draws.col(k));
    cols.push_back(c);
  }
  json j;
  j["model"] = out.model_tag;
  j["prior"] = to_json(m.prior);
  j["seed"] = out.seed;
  j["iters"] = out.n_iter;
  j["burnin"] = out.burn_in;
  j["thin"] = out.thin;
  j["retained"] = out.retained();
  j["column_order"] = names;
  j["parameters"] = cols;
  j["runtime_seconds"] = seconds;
  j["warnings"] = m.warnings;
  if (out.z_mean.size() > 0) j["outlier_probability"] = vec_json(out.z_mean);
  if (m.spec.effects.kind == RandomEffectKind::spatial) j["mh_acceptance"] = out.mh_acceptance;
  return j;
}

// --------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string design = "linear";
  std::string scenario = "0,--";
  int n = 0;
  int p = 0;
  double sigma = 0.5;
};

int run_simulate(const SimulateArgs& a) {
  const Scenario sc = parse_scenario(a.scenario);
  RngStream rng = RngStream(a.common.seed).child(0);
  SimulatedData sim;
  json truth;
  if (a.design == "linear") {
    LinearDesign d;
    if (a.n > 0) d.n = a.n;
    if (a.p > 0) d.p = a.p;
    d.sigma = a.sigma;
    sim = simulate_linear(d, sc, rng);
    truth["sigma"] = d.sigma;
  } else if (a.design == "random-intercept") {
    RandomInterceptDesign d;
    if (a.p > 0) d.p = a.p;
    sim = simulate_random_intercept(d, sc, rng);
    truth["sigma"] = d.sigma;
    truth["tau_v2"] = d.tau_v2;
    truth["effects"] = vec_json(sim.effects);
  } else {
    SpatialDesign d;
    if (a.n > 0) d.n = a.n;
    sim = simulate_spatial(d, rng);
    truth["sigma"] = d.sigma;
    truth["field"] = vec_json(sim.effects);
  }
  truth["design"] = a.design;
  truth["omega"] = sc.omega;
  truth["mu"] = sc.mu;
  truth["seed"] = a.common.seed;
  truth["beta"] = vec_json(sim.truth);
  truth["covariates"] = sim.train.covariate_names;

  auto write = [&](const Dataset& d, const std::vector<int>& outlier, const std::string& file) {
    std::vector<std::string> header(d.covariate_names.begin() + 1, d.covariate_names.end());
    header.push_back("y");
    const bool with_outlier = !outlier.empty();
    if (with_outlier) header.push_back("outlier");
    if (d.has_groups()) header.push_back("group");
    if (d.has_coords()) {
      header.push_back("sx");
      header.push_back("sy");
    }
    Eigen::MatrixXd v(d.n(), static_cast<Eigen::Index>(header.size()));
    const Eigen::Index p = d.p() - 1;
    v.leftCols(p) = d.X.rightCols(p);
    Eigen::Index c = p;
    v.col(c++) = d.y;
    if (with_outlier) {
      for (Eigen::Index i = 0; i < d.n(); ++i) v(i, c) = outlier[static_cast<std::size_t>(i)];
      ++c;
    }
    if (d.has_groups()) {
      for (Eigen::Index i = 0; i < d.n(); ++i) v(i, c) = d.groups[static_cast<std::size_t>(i)];
      ++c;
    }
    if (d.has_coords()) v.rightCols(2) = d.coords;
    write_file_atomic(join_path(a.common.output, file), to_csv(header, v));
  };
  write(sim.train, sim.outlier, "train.csv");
  if (sim.test.n() > 0) write(sim.test, {}, "test.csv");
  write_file_atomic(join_path(a.common.output, "truth.json"), truth.dump(2) + "\n");
  int contaminated = 0;
  for (int o : sim.outlier) contaminated += o;
  std::cout << "wrote " << sim.train.n() << " rows (" << contaminated << " contaminated) to " << a.common.output
            << "\n";
  return 0;
}

// --------------------------------------------------------------------------

struct FitArgs {
  Common common;
  DataFlags data;
  std::string model = "eh";
  bool record_latent = false;
};

int run_fit(const FitArgs& a) {
  const ValidatedModel m = build_model(a.data, a.model);
  McmcOptions mc = a.common.mcmc();
  mc.record_latent = a.record_latent;
  const auto t0 = std::chrono::steady_clock::now();
  const ChainOutput out = run_model(m, mc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(join_path(a.common.output, "draws.csv"), to_csv(out.column_names(), flatten_draws(out)));
  write_file_atomic(join_path(a.common.output, "summary.json"), summary_json(out, m, secs).dump(2) + "\n");
  std::cout << out.model_tag << ": " << out.retained() << " draws in " << secs << " s, written to "
            << a.common.output << "\n";
  return 0;
}

// --------------------------------------------------------------------------

struct ReplicateArgs {
  Common common;
  std::string design = "linear";
  std::vector<std::string> scenarios{"all"};
  std::vector<std::string> models{"eh", "normal"};
  int reps = 50;
  double sigma = 0.5;
  int n = 0;
};

int run_replicate(const ReplicateArgs& a) {
  std::vector<Scenario> grid;
  for (const auto& s : a.scenarios) {
    if (s == "all") {
      const auto all = standard_scenarios();
      grid.insert(grid.end(), all.begin(), all.end());
    } else {
      grid.push_back(parse_scenario(s));
    }
  }
  ReplicationPlan plan;
  plan.reps = a.reps;
  plan.seed = a.common.seed;
  plan.mcmc = a.common.mcmc();
  for (const auto& f : a.models) plan.models.push_back(model_choice(f, simulation_prior()));
  std::vector<std::vector<ModelScore>> results;
  json j;
  j["design"] = a.design;
  j["reps"] = a.reps;
  j["seed"] = a.common.seed;
  j["scenarios"] = json::array();
  for (const auto& sc : grid) {
    plan.scenario = sc;
    std::vector<ModelScore> scores;
    if (a.design == "linear") {
      LinearDesign d;
      d.sigma = a.sigma;
      if (a.n > 0) d.n = a.n;
      scores = replicate_linear(plan, d);
    } else {
      scores = replicate_random_intercept(plan);
    }
    json js;
    js["label"] = sc.label();
    js["omega"] = sc.omega;
    js["mu"] = sc.mu;
    for (const auto& s : scores) {
      js["models"].push_back(to_json(s));
      if (s.failures > 0) std::cerr << sc.label() << " " << s.model << ": " << s.failures << " failed replications\n";
    }
    j["scenarios"].push_back(js);
    results.push_back(std::move(scores));
  }
  std::cout << format_table(grid, results);
  if (a.design != "linear") {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::cout << "RMSPE   " << grid[i].label();
      for (const auto& s : results[i]) std::cout << "  " << s.model << "=" << 100.0 * s.coef.rmspe.value_or(0.0);
      std::cout << "\n";
    }
  }
  write_file_atomic(a.common.output, j.dump(2) + "\n");
  return 0;
}

// --------------------------------------------------------------------------

struct RobustnessArgs {
  Common common;
  DataFlags data;
  std::string model = "eh";
  std::vector<Eigen::Index> rows{0};
  std::vector<double> slopes;
  std::vector<double> magnitudes{10, 100, 1000, 10000};
  std::string reference = "removed";
};

int run_robustness(const RobustnessArgs& a) {
  PriorConfig prior = a.data.prior_config_value();
  ModelSpec spec = parse_model_flag(a.model, prior);
  spec.effects = a.data.effects();
  OutlierProbe probe;
  probe.outliers = a.rows;
  probe.slopes = a.slopes.empty() ? std::vector<double>(a.rows.size(), 1.0) : a.slopes;
  const auto ref = a.reference == "clean" ? RobustnessReference::clean_data : RobustnessReference::outliers_removed;
  const auto curve = robustness_sweep(a.data.dataset(prior), probe, prior, spec, a.magnitudes, a.common.mcmc(), ref);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(curve.size()), 3);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    v(r, 0) = curve[k].omega;
    v(r, 1) = curve[k].distance;
    v(r, 2) = curve[k].mc_se;
    std::cout << "omega=" << curve[k].omega << " distance=" << curve[k].distance << " mc_se=" << curve[k].mc_se
              << "\n";
  }
  write_file_atomic(a.common.output, to_csv({"omega", "distance", "mc_se"}, v));
  return 0;
}

// --------------------------------------------------------------------------

struct PredictArgs {
  Common common;
  DataFlags data;
  std::string model = "eh";
  std::string new_data;
  double level = 0.95;
};

int run_predict(const PredictArgs& a) {
  const ValidatedModel m = build_model(a.data, a.model);
  const ChainOutput out = run_model(m, a.common.mcmc());
  const CsvTable t = read_csv(a.new_data);
  Eigen::MatrixXd x(t.values.rows(), m.data.p());
  for (Eigen::Index k = 0; k < m.data.p(); ++k) {
    const auto& name = m.data.covariate_names[static_cast<std::size_t>(k)];
    x.col(k) = name == "intercept" && !t.has(name) ? Eigen::VectorXd::Ones(x.rows()) : t.col(name);
  }
  RngStream rng = RngStream(a.common.seed).child(7);
  const Predictive p = predict_clean(out, x, rng, a.level);
  Eigen::MatrixXd v(x.rows(), 3);
  v << p.mean, p.lower, p.upper;
  write_file_atomic(a.common.output, to_csv({"mean", "lower", "upper"}, v));
  std::cout << "predicted " << x.rows() << " rows\n";
  return 0;
}

// --------------------------------------------------------------------------

struct DicArgs {
  Common common;
  DataFlags data;
  std::vector<std::string> models{"eh", "mt", "normal"};
};

int run_dic(const DicArgs& a) {
  json j = json::array();
  for (const auto& flag : a.models) {
    const ValidatedModel m = build_model(a.data, flag);
    const ChainOutput out = run_model(m, a.common.mcmc());
    const DicResult r = dic(out, m);
    std::cout << std::left << std::setw(8) << flag << " DIC=" << std::fixed << std::setprecision(2) << r.dic
              << " pD=" << r.p_d << "\n";
    j.push_back({{"model", flag}, {"dic", r.dic}, {"mean_deviance", r.mean_deviance},
                 {"deviance_at_mean", r.deviance_at_mean}, {"p_d", r.p_d}});
  }
  write_file_atomic(a.common.output, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust Bayesian regression with extremely heavy-tailed errors"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate a contaminated dataset");
  add_common(c_sim, sim.common, false);
  c_sim->add_option("--design", sim.design)
      ->check(CLI::IsMember({"linear", "random-intercept", "spatial"}))
      ->capture_default_str();
  c_sim->add_option("--scenario", sim.scenario, "contamination as 100omega,mu (e.g. 10,20) or 0,--")
      ->capture_default_str();
  c_sim->add_option("--n", sim.n, "training rows");
  c_sim->add_option("--p", sim.p, "covariates");
  c_sim->add_option("--sigma", sim.sigma, "error scale")->capture_default_str();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "run one chain and write draws and a summary");
  add_common(c_fit, fit.common);
  add_data_flags(c_fit, fit.data);
  c_fit->add_option("--model", fit.model, "eh, aeh, normal, t:<nu>, at, mt")->capture_default_str();
  c_fit->add_flag("--record-latent", fit.record_latent, "also record u and z");

  ReplicateArgs rep;
  auto* c_rep = app.add_subcommand("replicate", "replicated simulation study");
  add_common(c_rep, rep.common);
  c_rep->add_option("--design", rep.design)
      ->check(CLI::IsMember({"linear", "random-intercept"}))
      ->capture_default_str();
  c_rep->add_option("--scenario", rep.scenarios, "scenario (repeatable) or 'all'")->take_all();
  c_rep->add_option("--models", rep.models, "comma-separated model flags")->delimiter(',');
  c_rep->add_option("--reps", rep.reps, "replications per scenario")->capture_default_str();
  c_rep->add_option("--sigma", rep.sigma, "error scale of the linear design")->capture_default_str();
  c_rep->add_option("--n", rep.n, "training rows of the linear design");

  RobustnessArgs rob;
  auto* c_rob = app.add_subcommand("robustness", "posterior distance as planted outliers grow");
  add_common(c_rob, rob.common);
  add_data_flags(c_rob, rob.data);
  c_rob->add_option("--model", rob.model)->capture_default_str();
  c_rob->add_option("--rows", rob.rows, "0-based outlier rows")->delimiter(',');
  c_rob->add_option("--slopes", rob.slopes, "per-row slope b_i (default 1)")->delimiter(',');
  c_rob->add_option("--magnitudes", rob.magnitudes, "omega values")->delimiter(',');
  c_rob->add_option("--reference", rob.reference)
      ->check(CLI::IsMember({"removed", "clean"}))
      ->capture_default_str();

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "predictive intervals for new rows");
  add_common(c_pred, pred.common);
  add_data_flags(c_pred, pred.data);
  c_pred->add_option("--model", pred.model)->capture_default_str();
  c_pred->add_option("--new", pred.new_data, "CSV of new covariate rows")->required();
  c_pred->add_option("--level", pred.level)->check(CLI::Range(0.5, 0.999))->capture_default_str();

  DicArgs dic_args;
  auto* c_dic = app.add_subcommand("dic", "deviance information criterion per model");
  add_common(c_dic, dic_args.common);
  add_data_flags(c_dic, dic_args.data);
  c_dic->add_option("--models", dic_args.models, "comma-separated model flags")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_sim) return run_simulate(sim);
    if (*c_fit) return run_fit(fit);
    if (*c_rep) return run_replicate(rep);
    if (*c_rob) return run_robustness(rob);
    if (*c_pred) return run_predict(pred);
    if (*c_dic) return run_dic(dic_args);
  } catch (const ValidationError& e) {
    std::cerr << "invalid model or data:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return 2;
  } catch (const UnsupportedParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
