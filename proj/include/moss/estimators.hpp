#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "moss/dataset.hpp"
#include "moss/eif.hpp"
#include "moss/glm.hpp"
#include "moss/nuisance.hpp"

namespace moss {

// Audit trail of a targeting loop. The log-likelihood is the pooled event
// process restricted to target-arm person-time rows; contributions of the
// other arm are constant along the submodel.
struct TargetingTrace {
  struct Iteration {
    Eigen::VectorXd epsilon;
    double norm = 0.0;
    double max_abs_mean_eif = 0.0;
    double loglik = 0.0;
  };
  std::vector<Iteration> iterations;
  std::string exit_reason;  // "epsilon", "eif", "max_iter", "stalled"
  double final_step_bound = 0.0;
};

struct CurveEstimate {
  std::string method;
  int arm = 1;
  Eigen::VectorXd psi;
  std::optional<Eigen::MatrixXd> eif;
  std::optional<TargetingTrace> trace;
  std::optional<Eigen::MatrixXd> hazard;  // targeted hazard (one-step TMLE)
  bool converged = true;

  bool monotone(double tol = 1e-12) const;
};

CurveEstimate kaplan_meier(const SurvivalDataset& ds, int arm);

// G-computation plug-in: psi(t) = mean_i S_N(t | a, W_i).
CurveEstimate plugin_curve(const NuisancePredictions& pred);

CurveEstimate ipcw(const NuisancePredictions& pred, const SurvivalDataset& ds);

// IPCW plus the sample mean of the EIF at the initial fit. May leave [0,1]
// and need not be monotone.
CurveEstimate ee(const NuisancePredictions& pred, const SurvivalDataset& ds);

struct IterativeTmleOptions {
  int max_iter = 50;
  double tol = 1e-3;
};

struct IterativeTmleResult {
  double psi = 0.0;
  Eigen::MatrixXd hazard;  // targeted hazard for this time point
  TargetingTrace trace;
  bool converged = true;
};

// Classic TMLE of psi(t) at a single time point: unconstrained univariate
// fluctuations until |eps| <= tol.
IterativeTmleResult tmle_iterative(const NuisancePredictions& pred, const SurvivalDataset& ds,
                                   int t, IterativeTmleOptions opts = {});

// Runs tmle_iterative independently per time point. Not monotone in general.
CurveEstimate tmle_curve_iterative(const NuisancePredictions& pred, const SurvivalDataset& ds,
                                   IterativeTmleOptions opts = {});

struct OneStepOptions {
  double step_bound = 0.01;
  double stop_norm = 1e-3;
  Penalty penalty = Penalty::L2;
  int max_iter = 500;
};

// One-step TMLE targeting the whole curve: small constrained fluctuations of
// a single hazard, so the output is monotone by construction.
CurveEstimate tmle_one_step(const NuisancePredictions& pred, const SurvivalDataset& ds,
                            OneStepOptions opts = {});

}  // namespace moss
