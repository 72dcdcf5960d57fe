#include "moss/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace moss {

namespace {

constexpr double kSurvFloor = 1e-12;
constexpr double kLogitCap = 500.0;  // keeps expit/logit round trips finite

double safe_logit(double p) { return logit(std::clamp(p, 1e-12, 1.0 - 1e-12)); }

Eigen::VectorXd column_means(const Eigen::MatrixXd& m) {
  return m.colwise().mean().transpose();
}

// Stopping rule for the one-step loop: every column of the EIF satisfies
// |mean| <= max(tol * sd_t, sd_t / (sqrt(n) log n), tol * max_s sd_s, 1e-6).
// The curve-scale term handles time points where events are rare or
// impossible: there the column's mean/sd ratio is structurally order one
// (every contribution shares the hazard's sign), so a purely column-relative
// bound is only solvable in the limit of a vanishing hazard, and chasing it
// perturbs the already-solved interior columns through the shared hazard.
constexpr double kEifAbsoluteFloor = 1e-6;

bool eif_equation_solved(const Eigen::MatrixXd& eif, double tol) {
  const double n = static_cast<double>(eif.rows());
  double slack = 1.0 / (std::sqrt(n) * std::log(std::max(n, 3.0)));
  double sd_max = 0.0;
  for (Eigen::Index t = 0; t < eif.cols(); ++t)
    sd_max = std::max(sd_max, std::sqrt(eif.col(t).squaredNorm() / n));
  for (Eigen::Index t = 0; t < eif.cols(); ++t) {
    double mean = eif.col(t).mean();
    double sd = std::sqrt(eif.col(t).squaredNorm() / n);
    double bound = std::max({tol * sd, sd * slack, sd_max * slack, kEifAbsoluteFloor});
    if (std::abs(mean) > bound) return false;
  }
  return true;
}

double max_abs_col_mean(const Eigen::MatrixXd& eif) {
  double m = 0.0;
  for (Eigen::Index t = 0; t < eif.cols(); ++t)
    m = std::max(m, std::abs(eif.col(t).mean()));
  return m;
}

// Person-time layout of the target arm, fixed across targeting iterations.
struct ArmRows {
  std::vector<int> subject;
  std::vector<int> k;  // 1-based
  Eigen::VectorXd y;
};

ArmRows collect_arm_rows(const SurvivalDataset& ds, int arm) {
  ArmRows rows;
  std::size_t total = 0;
  for (const auto& o : ds.observations)
    if (o.a == arm) total += static_cast<std::size_t>(o.t_tilde);
  rows.subject.reserve(total);
  rows.k.reserve(total);
  rows.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
  Eigen::Index r = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const auto& o = ds.observations[i];
    if (o.a != arm) continue;
    for (int k = 1; k <= o.t_tilde; ++k, ++r) {
      rows.subject.push_back(i);
      rows.k.push_back(k);
      if (k == o.t_tilde && o.delta == 1) rows.y[r] = 1.0;
    }
  }
  return rows;
}

Eigen::VectorXd row_offsets(const ArmRows& rows, const Eigen::MatrixXd& logits) {
  Eigen::VectorXd offsets(rows.y.size());
  for (Eigen::Index r = 0; r < offsets.size(); ++r)
    offsets[r] = logits(rows.subject[r], rows.k[r] - 1);
  return offsets;
}

Eigen::MatrixXd hazard_from_logits(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd hazard(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index k = 0; k < logits.cols(); ++k) hazard(i, k) = expit(logits(i, k));
  return hazard;
}

}  // namespace

bool CurveEstimate::monotone(double tol) const {
  for (Eigen::Index t = 1; t < psi.size(); ++t)
    if (psi[t] > psi[t - 1] + tol) return false;
  return true;
}

CurveEstimate kaplan_meier(const SurvivalDataset& ds, int arm) {
  int members = 0;
  for (const auto& o : ds.observations) members += (o.a == arm);
  if (members == 0) throw data_error("kaplan_meier: no subjects in requested arm");

  CurveEstimate est;
  est.method = "km";
  est.arm = arm;
  est.psi.resize(ds.t_max);
  std::vector<int> events(ds.t_max + 1, 0), at_risk(ds.t_max + 1, 0);
  for (const auto& o : ds.observations) {
    if (o.a != arm) continue;
    for (int k = 1; k <= o.t_tilde; ++k) ++at_risk[k];
    if (o.delta == 1) ++events[o.t_tilde];
  }
  double s = 1.0;
  for (int t = 1; t <= ds.t_max; ++t) {
    if (at_risk[t] > 0) s *= 1.0 - static_cast<double>(events[t]) / at_risk[t];
    est.psi[t - 1] = s;
  }
  return est;
}

CurveEstimate plugin_curve(const NuisancePredictions& pred) {
  CurveEstimate est;
  est.method = "plugin";
  est.arm = pred.arm;
  est.psi = column_means(pred.survival);
  return est;
}

CurveEstimate ipcw(const NuisancePredictions& pred, const SurvivalDataset& ds) {
  const int n = ds.n();
  CurveEstimate est;
  est.method = "ipcw";
  est.arm = pred.arm;
  est.psi = Eigen::VectorXd::Zero(pred.t_max);
  for (int i = 0; i < n; ++i) {
    const auto& o = ds.observations[i];
    if (o.a != pred.arm || o.delta != 1) continue;
    double denom = pred.censor_surv(i, o.t_tilde - 1) * pred.g[i];
    double weight = 1.0 / std::max(denom, kSurvFloor);
    for (int t = 1; t < o.t_tilde; ++t) est.psi[t - 1] += weight;  // I(t_tilde > t)
  }
  est.psi /= static_cast<double>(n);
  return est;
}

CurveEstimate ee(const NuisancePredictions& pred, const SurvivalDataset& ds) {
  CurveEstimate ipcw_est = ipcw(pred, ds);
  Eigen::VectorXd plugin_psi = column_means(pred.survival);
  Eigen::MatrixXd eif_values = eif_matrix(ds, pred.arm, pred.hazard, pred.survival,
                                          pred.censor_surv_left, pred.g, plugin_psi);
  CurveEstimate est;
  est.method = "ee";
  est.arm = pred.arm;
  est.psi = ipcw_est.psi + column_means(eif_values);
  est.eif = std::move(eif_values);
  return est;
}

IterativeTmleResult tmle_iterative(const NuisancePredictions& pred, const SurvivalDataset& ds,
                                   int t, IterativeTmleOptions opts) {
  if (t < 1 || t > pred.t_max) throw config_error("tmle_iterative: t outside 1..t_max");
  const int n = ds.n();
  const int t_max = pred.t_max;

  ArmRows rows = collect_arm_rows(ds, pred.arm);
  Eigen::MatrixXd logits(n, t_max);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < t_max; ++k) logits(i, k) = safe_logit(pred.hazard(i, k));
  Eigen::MatrixXd hazard = pred.hazard;
  Eigen::MatrixXd survival = pred.survival;

  IterativeTmleResult result;
  result.trace.final_step_bound = 0.0;
  Eigen::MatrixXd h_col(rows.y.size(), 1);
  bool converged = false;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // scalar clever covariate for target t at the current survival
    for (Eigen::Index r = 0; r < rows.y.size(); ++r) {
      int i = rows.subject[r];
      int k = rows.k[r];
      if (k > t) {
        h_col(r, 0) = 0.0;
        continue;
      }
      double f = -1.0 / (pred.g[i] * pred.censor_surv_left(i, k - 1) *
                         std::max(survival(i, k - 1), kSurvFloor));
      h_col(r, 0) = f * survival(i, t - 1);
    }
    Eigen::VectorXd offsets = row_offsets(rows, logits);
    LogisticFit fit = fit_logistic(h_col, rows.y, offsets, Eigen::VectorXd::Ones(rows.y.size()));
    double eps = fit.coefficients[0];

    Eigen::VectorXd psi_now = column_means(survival);
    Eigen::MatrixXd eif = eif_matrix(ds, pred.arm, hazard, survival, pred.censor_surv_left,
                                     pred.g, psi_now);
    TargetingTrace::Iteration it;
    it.epsilon = Eigen::VectorXd::Constant(1, eps);
    it.norm = std::abs(eps);
    it.max_abs_mean_eif = std::abs(eif.col(t - 1).mean());
    it.loglik = bernoulli_loglik(rows.y, offsets);
    result.trace.iterations.push_back(std::move(it));

    if (std::abs(eps) <= opts.tol) {
      converged = true;
      result.trace.exit_reason = "epsilon";
      break;
    }

    // apply the fluctuation to every subject's counterfactual hazard, k <= t
    for (int i = 0; i < n; ++i) {
      for (int k = 1; k <= t; ++k) {
        double f = -1.0 / (pred.g[i] * pred.censor_surv_left(i, k - 1) *
                           std::max(survival(i, k - 1), kSurvFloor));
        double h = f * survival(i, t - 1);
        logits(i, k - 1) = std::clamp(logits(i, k - 1) + eps * h, -kLogitCap, kLogitCap);
      }
    }
    hazard = hazard_from_logits(logits);
    survival = survival_from_hazard(hazard);
  }
  if (!converged) result.trace.exit_reason = "max_iter";
  result.converged = converged;
  result.psi = column_means(survival)[t - 1];
  result.hazard = std::move(hazard);
  return result;
}

CurveEstimate tmle_curve_iterative(const NuisancePredictions& pred, const SurvivalDataset& ds,
                                   IterativeTmleOptions opts) {
  CurveEstimate est;
  est.method = "tmle";
  est.arm = pred.arm;
  est.psi.resize(pred.t_max);
  est.converged = true;

  // Per-time EIF at each targeted hazard; column t comes from its own fit.
  Eigen::MatrixXd eif(ds.n(), pred.t_max);
  for (int t = 1; t <= pred.t_max; ++t) {
    IterativeTmleResult r = tmle_iterative(pred, ds, t, opts);
    est.psi[t - 1] = r.psi;
    est.converged = est.converged && r.converged;
    Eigen::MatrixXd survival = survival_from_hazard(r.hazard);
    Eigen::VectorXd psi_t = column_means(survival);
    Eigen::MatrixXd eif_t = eif_matrix(ds, pred.arm, r.hazard, survival,
                                       pred.censor_surv_left, pred.g, psi_t);
    eif.col(t - 1) = eif_t.col(t - 1);
  }
  est.eif = std::move(eif);
  return est;
}

CurveEstimate tmle_one_step(const NuisancePredictions& pred, const SurvivalDataset& ds,
                            OneStepOptions opts) {
  const int n = ds.n();
  const int t_max = pred.t_max;

  Eigen::MatrixXd logits(n, t_max);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < t_max; ++k) logits(i, k) = safe_logit(pred.hazard(i, k));
  Eigen::MatrixXd hazard = pred.hazard;
  Eigen::MatrixXd survival = pred.survival;

  ArmRows rows = collect_arm_rows(ds, pred.arm);
  const Eigen::Index R = rows.y.size();
  Eigen::MatrixXd H(R, t_max);
  Eigen::VectorXd tail(t_max);

  CurveEstimate est;
  est.method = opts.penalty == Penalty::L2 ? "moss-l2" : "moss-l1";
  est.arm = pred.arm;
  TargetingTrace trace;
  double step_bound = opts.step_bound;
  int rising_streak = 0;
  bool bound_halved = false;
  double prev_max_eif = std::numeric_limits<double>::infinity();
  std::string exit_reason = "max_iter";

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Eigen::MatrixXd factors =
        clever_col_factors(survival, pred.censor_surv_left, pred.g);
    Eigen::VectorXd psi_now = column_means(survival);
    Eigen::MatrixXd eif = eif_matrix(ds, pred.arm, hazard, survival, pred.censor_surv_left,
                                     pred.g, psi_now);
    double max_eif = max_abs_col_mean(eif);

    if (eif_equation_solved(eif, opts.stop_norm)) {
      exit_reason = "eif";
      break;
    }
    if (max_eif > prev_max_eif) {
      if (++rising_streak >= 10 && !bound_halved) {
        step_bound *= 0.5;
        bound_halved = true;
        rising_streak = 0;
      }
    } else {
      rising_streak = 0;
    }
    prev_max_eif = max_eif;

    // clever covariate matrix over target-arm person-time rows
    for (Eigen::Index r = 0; r < R; ++r) {
      int i = rows.subject[r];
      int k = rows.k[r];
      double f = factors(i, k - 1);
      for (int t = 1; t < k; ++t) H(r, t - 1) = 0.0;
      for (int t = k; t <= t_max; ++t) H(r, t - 1) = f * survival(i, t - 1);
    }
    Eigen::VectorXd offsets = row_offsets(rows, logits);
    ConstrainedStep step = constrained_step(H, rows.y, offsets, step_bound, opts.penalty);

    TargetingTrace::Iteration it;
    it.epsilon = step.epsilon;
    it.norm = step.norm;
    it.max_abs_mean_eif = max_eif;
    it.loglik = bernoulli_loglik(rows.y, offsets);
    trace.iterations.push_back(std::move(it));

    if (step.stalled) {
      exit_reason = "stalled";
      break;
    }
    if (step.proposed_norm <= opts.stop_norm) {
      exit_reason = "epsilon";
      break;
    }

    // logit update for every subject at the target arm:
    // logit lambda(i,k) += F(i,k) * sum_{t >= k} eps_t * S(i,t)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = t_max; k >= 1; --k) {
        acc += step.epsilon[k - 1] * survival(i, k - 1);
        tail[k - 1] = acc;
      }
      for (int k = 1; k <= t_max; ++k) {
        double delta = factors(i, k - 1) * tail[k - 1];
        logits(i, k - 1) = std::clamp(logits(i, k - 1) + delta, -kLogitCap, kLogitCap);
      }
    }
    hazard = hazard_from_logits(logits);
    survival = survival_from_hazard(hazard);
  }

  est.psi = column_means(survival);
  Eigen::MatrixXd eif_final = eif_matrix(ds, pred.arm, hazard, survival,
                                         pred.censor_surv_left, pred.g, est.psi);
  est.eif = std::move(eif_final);
  est.hazard = std::move(hazard);
  trace.exit_reason = exit_reason;
  trace.final_step_bound = step_bound;
  est.trace = std::move(trace);
  est.converged = exit_reason == "eif" || exit_reason == "epsilon";
  return est;
}

}  // namespace moss
