#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace moss {

inline double expit(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Probabilities entering a log are kept inside [1e-12, 1 - 1e-12].
inline double clamp_prob(double p) {
  const double lo = 1e-12;
  if (p < lo) return lo;
  if (p > 1.0 - lo) return 1.0 - lo;
  return p;
}

// Sum of Bernoulli log-likelihood contributions at the given logits.
double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& logits);
double bernoulli_loglik_weighted(const Eigen::VectorXd& y, const Eigen::VectorXd& logits,
                                 const Eigen::VectorXd& weights);

struct LogisticFit {
  Eigen::VectorXd coefficients;
  bool offset_used = false;
  bool converged = false;
  int iterations = 0;
  double final_negloglik = 0.0;
};

enum class Penalty { L2, L1 };

// One norm-constrained fluctuation step. `norm` is measured in the penalty's
// norm; `proposed_norm` is the candidate's norm before the likelihood
// backtrack and is what targeting loops test against their stop threshold.
struct ConstrainedStep {
  Eigen::VectorXd epsilon;
  double norm = 0.0;
  double score_norm_at_zero = 0.0;
  double proposed_norm = 0.0;
  bool stalled = false;
};

// Weighted logistic regression with a fixed offset, Newton iterations with
// step-halving, coefficients capped at |b| <= 20 under quasi-separation.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& offset, const Eigen::VectorXd& weights);

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Maximizes the Bernoulli log-likelihood of logit p = offset + H*eps subject
// to ||eps|| <= bound. If the unconstrained optimum already fits inside the
// ball it is returned; otherwise the step is the score direction scaled to
// the bound (L2) or a projected-gradient solution on the L1 ball, backtracked
// by halving until the log-likelihood does not fall below its value at 0.
ConstrainedStep constrained_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, double bound, Penalty penalty);

// Euclidean projection onto the L1 ball of radius `radius`.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius);

}  // namespace moss
