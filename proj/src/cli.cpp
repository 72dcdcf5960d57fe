#include "moss/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moss/csvio.hpp"
#include "moss/dataset.hpp"
#include "moss/eif.hpp"
#include "moss/estimators.hpp"
#include "moss/inference.hpp"
#include "moss/sim.hpp"
#include "moss/version.hpp"

namespace moss::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string input;
  std::string time_col = "time";
  std::string event_col = "event";
  std::string treatment_col = "a";
  std::string id_col;
  std::vector<std::string> covariates;
  bool discretize = false;
  int truncate_at = 0;  // 0 = none
  int rescale = 1;
  std::vector<std::string> methods = {"moss-l2"};
  std::string arm = "both";  // "0", "1", "both"
  double alpha = 0.05;
  std::string band = "simultaneous";  // none | pointwise | simultaneous
  std::string hazard_basis;           // JSON term lists; empty = default
  std::string censor_basis;
  std::string propensity_basis;
  double hazard_clamp = 1e-5;
  double g_lo = 0.01;
  double g_hi = 0.99;
  double step_bound = 0.01;
  double stop_norm = 1e-3;
  int max_iter = 500;
  std::string penalty = "l2";
  int tmle_max_iter = 50;
  double tmle_tol = 1e-3;
  std::uint64_t seed = 1;
  int reps = 100;
  int n = 1000;
  int mc_draws = 10000;
  std::vector<int> sizes = {100, 500, 1000};
  std::string out = "out";
  std::string format = "both";  // csv | json | both
  int threads = 1;
};

json config_to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"input", c.input},
              {"time_col", c.time_col},
              {"event_col", c.event_col},
              {"treatment_col", c.treatment_col},
              {"id_col", c.id_col},
              {"covariates", c.covariates},
              {"discretize", c.discretize},
              {"truncate_at", c.truncate_at},
              {"rescale", c.rescale},
              {"methods", c.methods},
              {"arm", c.arm},
              {"alpha", c.alpha},
              {"band", c.band},
              {"hazard_basis", c.hazard_basis},
              {"censor_basis", c.censor_basis},
              {"propensity_basis", c.propensity_basis},
              {"hazard_clamp", c.hazard_clamp},
              {"g_lo", c.g_lo},
              {"g_hi", c.g_hi},
              {"step_bound", c.step_bound},
              {"stop_norm", c.stop_norm},
              {"max_iter", c.max_iter},
              {"penalty", c.penalty},
              {"tmle_max_iter", c.tmle_max_iter},
              {"tmle_tol", c.tmle_tol},
              {"seed", c.seed},
              {"reps", c.reps},
              {"n", c.n},
              {"mc_draws", c.mc_draws},
              {"sizes", c.sizes},
              {"out", c.out},
              {"format", c.format},
              {"threads", c.threads}};
}

template <typename T>
void maybe_get(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void config_from_json(const json& j, RunConfig& c) {
  maybe_get(j, "input", c.input);
  maybe_get(j, "time_col", c.time_col);
  maybe_get(j, "event_col", c.event_col);
  maybe_get(j, "treatment_col", c.treatment_col);
  maybe_get(j, "id_col", c.id_col);
  maybe_get(j, "covariates", c.covariates);
  maybe_get(j, "discretize", c.discretize);
  maybe_get(j, "truncate_at", c.truncate_at);
  maybe_get(j, "rescale", c.rescale);
  maybe_get(j, "methods", c.methods);
  maybe_get(j, "arm", c.arm);
  maybe_get(j, "alpha", c.alpha);
  maybe_get(j, "band", c.band);
  maybe_get(j, "hazard_basis", c.hazard_basis);
  maybe_get(j, "censor_basis", c.censor_basis);
  maybe_get(j, "propensity_basis", c.propensity_basis);
  maybe_get(j, "hazard_clamp", c.hazard_clamp);
  maybe_get(j, "g_lo", c.g_lo);
  maybe_get(j, "g_hi", c.g_hi);
  maybe_get(j, "step_bound", c.step_bound);
  maybe_get(j, "stop_norm", c.stop_norm);
  maybe_get(j, "max_iter", c.max_iter);
  maybe_get(j, "penalty", c.penalty);
  maybe_get(j, "tmle_max_iter", c.tmle_max_iter);
  maybe_get(j, "tmle_tol", c.tmle_tol);
  maybe_get(j, "seed", c.seed);
  maybe_get(j, "reps", c.reps);
  maybe_get(j, "n", c.n);
  maybe_get(j, "mc_draws", c.mc_draws);
  maybe_get(j, "sizes", c.sizes);
  maybe_get(j, "out", c.out);
  maybe_get(j, "format", c.format);
  maybe_get(j, "threads", c.threads);
}

void write_manifest(const RunConfig& cfg) {
  json manifest;
  manifest["command"] = cfg.command;
  manifest["config"] = config_to_json(cfg);
  manifest["seed"] = cfg.seed;
  manifest["versions"] = json{{"moss", kVersion}};
  std::ofstream out(fs::path(cfg.out) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

BasisSpec basis_or_default(const std::string& text, const BasisSpec& fallback) {
  if (text.empty()) return fallback;
  return BasisSpec::from_json(text);
}

OneStepOptions onestep_options(const RunConfig& cfg) {
  OneStepOptions o;
  o.step_bound = cfg.step_bound;
  o.stop_norm = cfg.stop_norm;
  o.max_iter = cfg.max_iter;
  if (cfg.penalty == "l2") {
    o.penalty = Penalty::L2;
  } else if (cfg.penalty == "l1") {
    o.penalty = Penalty::L1;
  } else {
    throw config_error("penalty must be l1 or l2");
  }
  return o;
}

IterativeTmleOptions iterative_options(const RunConfig& cfg) {
  IterativeTmleOptions o;
  o.max_iter = cfg.tmle_max_iter;
  o.tol = cfg.tmle_tol;
  return o;
}

std::vector<int> requested_arms(const RunConfig& cfg) {
  if (cfg.arm == "both") return {1, 0};
  if (cfg.arm == "1") return {1};
  if (cfg.arm == "0") return {0};
  throw config_error("arm must be 0, 1 or both");
}

bool method_is_plugin_family(const std::string& m) {
  return m == "plugin" || m == "tmle" || m == "moss-l2" || m == "moss-l1" || m == "km";
}

struct NamedCurve {
  std::string method;
  std::string arm;  // "0", "1", "diff"
  Eigen::VectorXd psi;
  std::optional<Eigen::MatrixXd> eif;
  bool monotone = true;
  bool converged = true;
  std::optional<BandResult> band;
};

void clip_for_output(const NamedCurve& curve, double& lo, double& hi) {
  if (!method_is_plugin_family(curve.method)) return;
  double floor_v = curve.arm == "diff" ? -1.0 : 0.0;
  lo = std::max(lo, floor_v);
  hi = std::min(hi, 1.0);
}

int cmd_estimate(RunConfig& cfg) {
  if (cfg.input.empty()) throw config_error("--input is required");
  CsvSchema schema;
  schema.time_col = cfg.time_col;
  schema.event_col = cfg.event_col;
  schema.treatment_col = cfg.treatment_col;
  schema.id_col = cfg.id_col;
  schema.covariate_cols = cfg.covariates;
  schema.discretize_ceil = cfg.discretize;

  SurvivalDataset ds = load_csv(cfg.input, schema);
  if (cfg.truncate_at > 0 || cfg.rescale > 1)
    ds = preprocess(ds, cfg.truncate_at > 0 ? std::optional<int>(cfg.truncate_at) : std::nullopt,
                    cfg.rescale);

  HazardClamp clamp{cfg.hazard_clamp, 1.0 - cfg.hazard_clamp};
  PropensityBounds bounds{cfg.g_lo, cfg.g_hi};
  BasisSpec hazard_basis =
      basis_or_default(cfg.hazard_basis, BasisSpec::default_hazard(ds.covariate_names));
  BasisSpec censor_basis = basis_or_default(cfg.censor_basis, hazard_basis);
  BasisSpec prop_basis =
      basis_or_default(cfg.propensity_basis, BasisSpec::default_propensity(ds.covariate_names));
  NuisanceFit fit = fit_nuisance(ds, hazard_basis, censor_basis, prop_basis, clamp, bounds);

  std::vector<int> arms = requested_arms(cfg);
  OneStepOptions onestep = onestep_options(cfg);
  IterativeTmleOptions iterative = iterative_options(cfg);

  std::vector<NamedCurve> curves;
  std::map<int, NuisancePredictions> preds;
  for (int arm : arms) preds[arm] = predict_matrices(fit, ds, arm);

  for (const auto& method : cfg.methods) {
    std::map<int, CurveEstimate> per_arm;
    for (int arm : arms) {
      CurveEstimate est = sim::run_method(method, ds, preds[arm], onestep, iterative);
      NamedCurve c;
      c.method = method;
      c.arm = std::to_string(arm);
      c.psi = est.psi;
      c.eif = est.eif;
      c.monotone = est.monotone();
      c.converged = est.converged;
      curves.push_back(c);
      per_arm[arm] = std::move(est);
    }
    if (arms.size() == 2) {
      // difference curve (treatment minus control), delta-method EIF
      NamedCurve diff;
      diff.method = method;
      diff.arm = "diff";
      diff.psi = per_arm[1].psi - per_arm[0].psi;
      if (per_arm[1].eif && per_arm[0].eif)
        diff.eif = *per_arm[1].eif - *per_arm[0].eif;
      diff.monotone = true;  // not meaningful for differences
      curves.push_back(std::move(diff));
    }
  }

  for (auto& c : curves) {
    if (!c.eif || cfg.band == "none") continue;
    if (cfg.band == "pointwise")
      c.band = pointwise_ci(*c.eif, c.psi, cfg.alpha);
    else
      c.band = simultaneous_band(*c.eif, c.psi, cfg.alpha, cfg.mc_draws, cfg.seed, cfg.threads);
  }

  fs::create_directories(cfg.out);
  bool write_csv = cfg.format == "csv" || cfg.format == "both";
  bool write_json = cfg.format == "json" || cfg.format == "both";

  if (write_csv) {
    CsvWriter all(fs::path(cfg.out) / "curves.csv");
    all.row({"t", "psi", "se", "lo", "hi", "method", "arm"});
    for (const auto& c : curves) {
      for (int t = 1; t <= c.psi.size(); ++t) {
        std::string se, lo, hi;
        if (c.band) {
          double lo_v = c.band->lo_pw[t - 1], hi_v = c.band->hi_pw[t - 1];
          clip_for_output(c, lo_v, hi_v);
          se = fmt_num(c.band->se[t - 1]);
          lo = fmt_num(lo_v);
          hi = fmt_num(hi_v);
        }
        all.row({std::to_string(t), fmt_num(c.psi[t - 1]), se, lo, hi, c.method, c.arm});
      }
    }
    for (const auto& c : curves) {
      if (!c.band) continue;
      CsvWriter band_csv(fs::path(cfg.out) /
                         ("band_" + c.method + "_arm" + c.arm + ".csv"));
      bool simul = cfg.band == "simultaneous";
      if (simul)
        band_csv.row({"t", "psi", "se", "lo_pw", "hi_pw", "lo_simul", "hi_simul"});
      else
        band_csv.row({"t", "psi", "se", "lo_pw", "hi_pw"});
      for (int t = 1; t <= c.psi.size(); ++t) {
        double lo_pw = c.band->lo_pw[t - 1], hi_pw = c.band->hi_pw[t - 1];
        clip_for_output(c, lo_pw, hi_pw);
        std::vector<std::string> fields = {std::to_string(t), fmt_num(c.psi[t - 1]),
                                           fmt_num(c.band->se[t - 1]), fmt_num(lo_pw),
                                           fmt_num(hi_pw)};
        if (simul) {
          double lo_s = c.band->lo_simul[t - 1], hi_s = c.band->hi_simul[t - 1];
          clip_for_output(c, lo_s, hi_s);
          fields.push_back(fmt_num(lo_s));
          fields.push_back(fmt_num(hi_s));
        }
        band_csv.row(fields);
      }
    }
  }

  if (write_json) {
    json jcurves = json::array();
    for (const auto& c : curves) {
      json jc;
      jc["method"] = c.method;
      jc["arm"] = c.arm;
      jc["monotone"] = c.monotone;
      jc["converged"] = c.converged;
      jc["psi"] = std::vector<double>(c.psi.data(), c.psi.data() + c.psi.size());
      if (c.band) {
        jc["se"] = std::vector<double>(c.band->se.data(), c.band->se.data() + c.band->se.size());
        jc["pointwise_quantile"] = c.band->pointwise_quantile;
        if (cfg.band == "simultaneous")
          jc["simultaneous_quantile"] = c.band->simultaneous_quantile;
      }
      jcurves.push_back(jc);
    }
    json root;
    root["n"] = ds.n();
    root["t_max"] = ds.t_max;
    root["dropped_rows"] = ds.dropped_rows;
    root["curves"] = jcurves;
    std::ofstream jf(fs::path(cfg.out) / "curves.json");
    jf << root.dump(2) << "\n";
  }

  write_manifest(cfg);
  return 0;
}

int cmd_simulate(RunConfig& cfg) {
  sim::StudyConfig study;
  study.dgp.n = cfg.n;
  study.dgp.seed = cfg.seed;
  study.reps = cfg.reps;
  study.methods = cfg.methods;
  study.arms = requested_arms(cfg);
  study.onestep = onestep_options(cfg);
  study.iterative = iterative_options(cfg);
  study.threads = cfg.threads;
  if (!cfg.hazard_basis.empty())
    study.bases.hazard = BasisSpec::from_json(cfg.hazard_basis);
  if (!cfg.censor_basis.empty()) study.bases.censor = BasisSpec::from_json(cfg.censor_basis);
  if (!cfg.propensity_basis.empty())
    study.bases.propensity = BasisSpec::from_json(cfg.propensity_basis);

  sim::StudyReport report = sim::run_study(study);
  fs::create_directories(cfg.out);
  if (cfg.format != "json")
    for (int arm : study.arms)
      report.write_csv((fs::path(cfg.out) / ("study_arm" + std::to_string(arm) + ".csv")).string(),
                       arm);
  if (cfg.format != "csv") {
    std::ofstream jf(fs::path(cfg.out) / "study.json");
    jf << report.to_json() << "\n";
  }
  write_manifest(cfg);
  return 0;
}

int cmd_diagnose(RunConfig& cfg) {
  if (cfg.input.empty()) throw config_error("--input is required");
  CsvSchema schema;
  schema.time_col = cfg.time_col;
  schema.event_col = cfg.event_col;
  schema.treatment_col = cfg.treatment_col;
  schema.id_col = cfg.id_col;
  schema.covariate_cols = cfg.covariates;
  schema.discretize_ceil = cfg.discretize;

  SurvivalDataset ds = load_csv(cfg.input, schema);
  if (cfg.truncate_at > 0 || cfg.rescale > 1)
    ds = preprocess(ds, cfg.truncate_at > 0 ? std::optional<int>(cfg.truncate_at) : std::nullopt,
                    cfg.rescale);

  HazardClamp clamp{cfg.hazard_clamp, 1.0 - cfg.hazard_clamp};
  PropensityBounds bounds{cfg.g_lo, cfg.g_hi};
  BasisSpec hazard_basis =
      basis_or_default(cfg.hazard_basis, BasisSpec::default_hazard(ds.covariate_names));
  BasisSpec censor_basis = basis_or_default(cfg.censor_basis, hazard_basis);
  BasisSpec prop_basis =
      basis_or_default(cfg.propensity_basis, BasisSpec::default_propensity(ds.covariate_names));
  NuisanceFit fit = fit_nuisance(ds, hazard_basis, censor_basis, prop_basis, clamp, bounds);

  fs::create_directories(cfg.out);
  for (int arm : requested_arms(cfg)) {
    NuisancePredictions pred = predict_matrices(fit, ds, arm);
    auto rows = inverse_weight_summary(pred);
    write_inverse_weight_csv(
        (fs::path(cfg.out) / ("inverse_weights_arm" + std::to_string(arm) + ".csv")).string(),
        rows);
  }
  write_manifest(cfg);
  return 0;
}

int cmd_monotonicity(RunConfig& cfg) {
  sim::SimBases bases = sim::SimBases::well_specified();
  SurvivalDataset ds;
  if (!cfg.input.empty()) {
    CsvSchema schema;
    schema.time_col = cfg.time_col;
    schema.event_col = cfg.event_col;
    schema.treatment_col = cfg.treatment_col;
    schema.id_col = cfg.id_col;
    schema.covariate_cols = cfg.covariates;
    schema.discretize_ceil = cfg.discretize;
    ds = load_csv(cfg.input, schema);
    bases.hazard = basis_or_default(cfg.hazard_basis,
                                    BasisSpec::default_hazard(ds.covariate_names));
    bases.censor = basis_or_default(cfg.censor_basis, bases.hazard);
    bases.propensity = basis_or_default(cfg.propensity_basis,
                                        BasisSpec::default_propensity(ds.covariate_names));
  } else {
    sim::DgpConfig dgp;
    dgp.n = cfg.n;
    dgp.seed = cfg.seed;
    ds = sim::simulate(dgp);
    if (!cfg.hazard_basis.empty()) bases.hazard = BasisSpec::from_json(cfg.hazard_basis);
    if (!cfg.censor_basis.empty()) bases.censor = BasisSpec::from_json(cfg.censor_basis);
    if (!cfg.propensity_basis.empty())
      bases.propensity = BasisSpec::from_json(cfg.propensity_basis);
  }

  int arm = cfg.arm == "0" ? 0 : 1;
  sim::MonotonicityTable table = sim::monotonicity_experiment(
      ds, cfg.sizes, cfg.reps, cfg.methods, cfg.seed, bases, arm, onestep_options(cfg),
      iterative_options(cfg), cfg.threads);
  fs::create_directories(cfg.out);
  table.write_csv((fs::path(cfg.out) / "monotonicity.csv").string());
  write_manifest(cfg);
  return 0;
}

void emit_error(const std::string& type, const std::string& message) {
  json err{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  RunConfig cfg;

  // a config file provides defaults; explicit flags override it
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      std::ifstream in(args[i + 1]);
      if (!in) {
        emit_error("config", "cannot open config file: " + args[i + 1]);
        return 2;
      }
      try {
        json j = json::parse(in);
        config_from_json(j, cfg);
      } catch (const std::exception& e) {
        emit_error("config", e.what());
        return 2;
      }
    }
  }

  CLI::App app{"counterfactual survival curve estimation"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override)");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--threads", cfg.threads, "worker threads");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--format", cfg.format, "csv|json|both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    sub->add_option("--method", cfg.methods,
                    "method tags: km plugin ipcw ee tmle moss-l2 moss-l1")
        ->delimiter(',');
    sub->add_option("--arm", cfg.arm, "0|1|both");
    sub->add_option("--step-bound", cfg.step_bound, "one-step constraint radius");
    sub->add_option("--stop-norm", cfg.stop_norm, "one-step stop threshold");
    sub->add_option("--max-iter", cfg.max_iter, "one-step iteration cap");
    sub->add_option("--penalty", cfg.penalty, "l2|l1")
        ->check(CLI::IsMember({"l1", "l2"}));
    sub->add_option("--tmle-max-iter", cfg.tmle_max_iter, "iterative TMLE cap");
    sub->add_option("--tmle-tol", cfg.tmle_tol, "iterative TMLE stop tolerance");
    sub->add_option("--hazard-basis", cfg.hazard_basis, "failure hazard basis (JSON terms)");
    sub->add_option("--censor-basis", cfg.censor_basis, "censoring hazard basis (JSON terms)");
    sub->add_option("--propensity-basis", cfg.propensity_basis, "propensity basis (JSON terms)");
    sub->add_option("--hazard-clamp", cfg.hazard_clamp, "hazard clamp epsilon");
    sub->add_option("--g-lo", cfg.g_lo, "propensity lower clamp");
    sub->add_option("--g-hi", cfg.g_hi, "propensity upper clamp");
  };
  auto add_schema = [&](CLI::App* sub, bool) {
    sub->add_option("--input", cfg.input, "input CSV path (config file may supply it)");
    sub->add_option("--time-col", cfg.time_col, "time column");
    sub->add_option("--event-col", cfg.event_col, "event indicator column");
    sub->add_option("--treatment-col", cfg.treatment_col, "treatment column");
    sub->add_option("--id-col", cfg.id_col, "id column (optional)");
    sub->add_option("--covariates", cfg.covariates, "covariate columns")->delimiter(',');
    sub->add_flag("--discretize", cfg.discretize, "map real times by ceil");
    sub->add_option("--truncate-at", cfg.truncate_at, "censor beyond this time (0 = off)");
    sub->add_option("--rescale", cfg.rescale, "time rescaling divisor");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "estimate survival curves from a CSV");
  add_schema(estimate, true);
  add_common(estimate);
  estimate->add_option("--alpha", cfg.alpha, "confidence level complement");
  estimate->add_option("--band", cfg.band, "none|pointwise|simultaneous")
      ->check(CLI::IsMember({"none", "pointwise", "simultaneous"}));
  estimate->add_option("--mc-draws", cfg.mc_draws, "band Monte-Carlo draws");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo study on the built-in DGP");
  add_common(simulate);
  simulate->add_option("--n", cfg.n, "sample size per replicate");
  simulate->add_option("--reps", cfg.reps, "Monte-Carlo repetitions");

  CLI::App* diagnose = app.add_subcommand("diagnose", "inverse-weight distribution tables");
  add_schema(diagnose, true);
  add_common(diagnose);

  CLI::App* monotonicity =
      app.add_subcommand("monotonicity", "monotone-curve frequency under subsampling");
  add_schema(monotonicity, false);
  add_common(monotonicity);
  monotonicity->add_option("--n", cfg.n, "simulated size when no input file given");
  monotonicity->add_option("--reps", cfg.reps, "subsampling repetitions");
  monotonicity->add_option("--sizes", cfg.sizes, "subsample sizes")->delimiter(',');

  // CLI11 consumes the vector in reverse order
  std::vector<std::string> argv_like(args.rbegin(), args.rend());
  try {
    app.parse(argv_like);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("config", e.what());
    return 2;
  }

  try {
    if (estimate->parsed()) {
      cfg.command = "estimate";
      return cmd_estimate(cfg);
    }
    if (simulate->parsed()) {
      cfg.command = "simulate";
      return cmd_simulate(cfg);
    }
    if (diagnose->parsed()) {
      cfg.command = "diagnose";
      return cmd_diagnose(cfg);
    }
    if (monotonicity->parsed()) {
      cfg.command = "monotonicity";
      return cmd_monotonicity(cfg);
    }
    emit_error("config", "no subcommand given");
    return 2;
  } catch (const config_error& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const data_error& e) {
    emit_error("data", e.what());
    return 3;
  } catch (const numeric_error& e) {
    emit_error("numeric", e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error("numeric", e.what());
    return 4;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace moss::cli
