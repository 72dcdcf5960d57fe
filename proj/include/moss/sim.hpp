#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moss/basis.hpp"
#include "moss/dataset.hpp"
#include "moss/estimators.hpp"

namespace moss::sim {

// Data-generating process: confounded treatment, near-deterministic
// log-normal failure time, Weibull censoring.
struct DgpConfig {
  int n = 1000;
  std::uint64_t seed = 1;
  double w_upper = 1.5;
  double treat_base = 0.4;
  double treat_bump = 0.5;
  double treat_threshold = 0.75;
  double log_mu_intercept = 2.0;
  double log_mu_w = -1.0;
  double log_mu_a = 1.0;
  double log_sigma = 0.01;
  double weibull_shape_base = 1.0;
  double weibull_shape_w = 0.5;
  double weibull_scale = 75.0;
  int t_max_cap = 21;  // analysis grid cap; times beyond become censored
};

// Deterministic for (cfg.seed, stream); the covariate is named "W".
SurvivalDataset simulate(const DgpConfig& cfg, std::uint64_t stream = 0);

// Counterfactual truth P(T_a > t) by Monte-Carlo from the failure-time
// marginal (default 1e6 draws).
Eigen::VectorXd oracle_curve(const DgpConfig& cfg, int arm, int t_max,
                             int draws = 1000000, std::uint64_t seed = 987654321);

// sigma -> 0 limit, used as an analytic cross-check of the MC oracle.
double oracle_closed_form(const DgpConfig& cfg, int arm, double t);

// Bases matching the structure of the DGP (log-time single index for the
// hazards, threshold indicator for the propensity).
struct SimBases {
  BasisSpec hazard;
  BasisSpec censor;
  BasisSpec propensity;
  static SimBases well_specified();
};

struct StudyConfig {
  DgpConfig dgp;
  int reps = 100;
  std::vector<std::string> methods = {"km", "plugin", "ipcw", "ee", "tmle", "moss-l2"};
  std::vector<int> arms = {1, 0};
  SimBases bases = SimBases::well_specified();
  OneStepOptions onestep;
  IterativeTmleOptions iterative;
  int threads = 1;
};

struct StudyMetricsRow {
  std::string method;
  int arm = 1;
  int t = 1;
  double bias = 0, variance = 0, mse = 0, re = 0;
};

struct StudyReport {
  std::vector<StudyMetricsRow> rows;
  std::map<std::pair<std::string, int>, double> monotone_fraction;  // (method, arm)
  std::map<std::pair<std::string, int>, int> failures;
  int reps = 0;
  int t_max = 0;
  double runtime_seconds = 0.0;
  std::map<int, Eigen::VectorXd> oracle;  // per arm

  void write_csv(const std::string& path, int arm) const;
  std::string to_json() const;
};

StudyReport run_study(const StudyConfig& cfg);

// Repeated subsampling without replacement from a fixed dataset; per method
// and size, the fraction of runs with a monotone curve.
struct MonotonicityTable {
  std::vector<int> sizes;
  std::vector<std::string> methods;
  // percentage[size_index][method_index] in [0, 100]
  std::vector<std::vector<double>> percentage;

  void write_csv(const std::string& path) const;
};

MonotonicityTable monotonicity_experiment(const SurvivalDataset& ds, std::vector<int> sizes,
                                          int reps, std::vector<std::string> methods,
                                          std::uint64_t seed, const SimBases& bases,
                                          int arm = 1, OneStepOptions onestep = {},
                                          IterativeTmleOptions iterative = {}, int threads = 1);

// Dispatches a method tag onto fitted predictions; shared by the study
// runner and the CLI.
CurveEstimate run_method(const std::string& method, const SurvivalDataset& ds,
                         const NuisancePredictions& pred, OneStepOptions onestep = {},
                         IterativeTmleOptions iterative = {});

}  // namespace moss::sim
