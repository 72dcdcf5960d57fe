#include "moss/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "moss/errors.hpp"

namespace moss {

namespace {

constexpr double kCoefCap = 20.0;
constexpr double kNllTol = 1e-10;
constexpr double kScoreTol = 1e-6;
constexpr int kMaxNewton = 100;

double negloglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& offset, const Eigen::VectorXd& weights,
                 const Eigen::VectorXd& beta) {
  double nll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double eta = offset[i] + (X.cols() ? X.row(i).dot(beta) : 0.0);
    double p = clamp_prob(expit(eta));
    nll -= weights[i] * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
  }
  return nll;
}

Eigen::VectorXd clamp_coefs(Eigen::VectorXd beta) {
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    beta[j] = std::clamp(beta[j], -kCoefCap, kCoefCap);
  return beta;
}

// Solves A x = b; on a singular system applies one diagonal jitter retry.
Eigen::VectorXd solve_normal_equations(Eigen::MatrixXd A, const Eigen::VectorXd& b) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd x = ldlt.solve(b);
      double resid = (A * x - b).norm();
      if (x.allFinite() && resid <= 1e-8 * (b.norm() + 1.0)) return x;
    }
    A.diagonal().array() += 1e-10;
  }
  throw numeric_error("singular normal equations in logistic fit");
}

}  // namespace

double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& logits) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = clamp_prob(expit(logits[i]));
    ll += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return ll;
}

double bernoulli_loglik_weighted(const Eigen::VectorXd& y, const Eigen::VectorXd& logits,
                                 const Eigen::VectorXd& weights) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = clamp_prob(expit(logits[i]));
    ll += weights[i] * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
  }
  return ll;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& offset, const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = X.cols();
  if (n == 0) throw data_error("fit_logistic: empty response");
  if (X.rows() != n || offset.size() != n || weights.size() != n)
    throw data_error("fit_logistic: dimension mismatch");

  LogisticFit fit;
  fit.offset_used = !offset.isZero(0.0);
  fit.coefficients = Eigen::VectorXd::Zero(p);
  if (p == 0) {
    fit.converged = true;
    fit.final_negloglik = negloglik(X, y, offset, weights, fit.coefficients);
    return fit;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double cur_nll = negloglik(X, y, offset, weights, beta);
  double last_delta = std::numeric_limits<double>::infinity();

  Eigen::VectorXd eta(n), prob(n), residual(n), wdiag(n);
  int iter = 0;
  while (iter < kMaxNewton) {
    ++iter;
    eta = offset + X * beta;
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(eta[i]);
    residual = weights.cwiseProduct(y - prob);
    Eigen::VectorXd grad = X.transpose() * residual;
    bool score_ok = grad.lpNorm<Eigen::Infinity>() <= kScoreTol;
    if (score_ok && last_delta < kNllTol) break;
    if (score_ok && iter == 1) {
      last_delta = 0.0;
      continue;  // next pass confirms
    }

    for (Eigen::Index i = 0; i < n; ++i)
      wdiag[i] = std::max(weights[i] * prob[i] * (1.0 - prob[i]), 1e-12);
    Eigen::MatrixXd info = X.transpose() * wdiag.asDiagonal() * X;
    Eigen::VectorXd step = solve_normal_equations(info, grad);

    // step-halving on non-decrease of the negative log-likelihood
    double scale = 1.0;
    Eigen::VectorXd candidate;
    double new_nll = cur_nll;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      candidate = clamp_coefs(beta + scale * step);
      new_nll = negloglik(X, y, offset, weights, candidate);
      if (new_nll <= cur_nll) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;  // stuck; convergence decided by the score below

    beta = candidate;
    last_delta = cur_nll - new_nll;
    cur_nll = new_nll;
    if (last_delta == 0.0) break;  // pinned at the cap or exactly stationary
  }

  fit.coefficients = beta;
  fit.iterations = iter;
  fit.final_negloglik = cur_nll;
  Eigen::VectorXd final_eta = offset + X * beta;
  for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(final_eta[i]);
  Eigen::VectorXd final_grad = X.transpose() * (weights.cwiseProduct(y - prob));
  bool at_cap = (beta.cwiseAbs().array() >= kCoefCap - 1e-12).any();
  fit.converged = final_grad.lpNorm<Eigen::Infinity>() <= kScoreTol && !at_cap;
  return fit;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return fit_logistic(X, y, Eigen::VectorXd::Zero(y.size()), Eigen::VectorXd::Ones(y.size()));
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  Eigen::VectorXd mags = v.cwiseAbs();
  std::vector<double> sorted(mags.data(), mags.data() + mags.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) {
      rho = static_cast<int>(j + 1);
      theta = candidate;
    }
  }
  (void)rho;
  Eigen::VectorXd out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    double m = std::abs(v[j]) - theta;
    out[j] = m > 0.0 ? (v[j] > 0 ? m : -m) : 0.0;
  }
  return out;
}

namespace {

// Euclidean-ball ridge step: epsilon(mu) = (A + mu I)^-1 s with mu chosen so
// the norm meets the bound. ||epsilon(mu)|| is decreasing in mu, so a
// bisection on log-mu suffices.
Eigen::VectorXd ridge_step_to_bound(const Eigen::MatrixXd& info, const Eigen::VectorXd& score,
                                    double bound) {
  auto solve_at = [&](double mu) -> Eigen::VectorXd {
    Eigen::MatrixXd a = info;
    a.diagonal().array() += mu;
    return Eigen::LDLT<Eigen::MatrixXd>(a).solve(score);
  };
  double mu_hi = score.norm() / bound;  // guarantees ||eps|| <= bound
  double mu_lo = 1e-12 * std::max(1.0, info.diagonal().maxCoeff());
  Eigen::VectorXd at_lo = solve_at(mu_lo);
  if (at_lo.allFinite() && at_lo.norm() <= bound) return at_lo;
  for (int it = 0; it < 80; ++it) {
    double mu = std::sqrt(mu_lo * mu_hi);
    double norm = solve_at(mu).norm();
    if (norm > bound)
      mu_lo = mu;
    else
      mu_hi = mu;
    if (mu_hi / mu_lo < 1.0 + 1e-10) break;
  }
  Eigen::VectorXd eps = solve_at(mu_hi);
  double norm = eps.norm();
  if (norm > bound) eps *= bound / norm;  // mu_hi is the feasible endpoint
  return eps;
}

// Soft-thresholded coordinate descent on the local quadratic model
// s'e - e'Ae/2 - penalty*||e||_1; the penalty is bisected until the solution
// lands on the L1 ball of the requested radius.
Eigen::VectorXd l1_coordinate_step(const Eigen::MatrixXd& info, const Eigen::VectorXd& score,
                                   double bound) {
  const Eigen::Index p = score.size();
  auto soft = [](double v, double threshold) {
    if (v > threshold) return v - threshold;
    if (v < -threshold) return v + threshold;
    return 0.0;
  };
  auto solve_penalized = [&](double penalty) -> Eigen::VectorXd {
    Eigen::VectorXd eps = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd a_eps = Eigen::VectorXd::Zero(p);  // A * eps
    for (int sweep = 0; sweep < 60; ++sweep) {
      double max_move = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        double ajj = info(j, j);
        if (ajj <= 1e-14) continue;
        double partial = score[j] - a_eps[j] + ajj * eps[j];
        double next = soft(partial, penalty) / ajj;
        double move = next - eps[j];
        if (move != 0.0) {
          a_eps += move * info.col(j);
          eps[j] = next;
          max_move = std::max(max_move, std::abs(move));
        }
      }
      if (max_move < 1e-14) break;
    }
    return eps;
  };

  Eigen::VectorXd unpenalized = solve_penalized(0.0);
  if (unpenalized.lpNorm<1>() <= bound) return unpenalized;
  double hi = score.lpNorm<Eigen::Infinity>();  // epsilon = 0 up here
  double lo = 0.0;
  Eigen::VectorXd eps = unpenalized;
  for (int it = 0; it < 60; ++it) {
    double penalty = 0.5 * (lo + hi);
    eps = solve_penalized(penalty);
    double norm = eps.lpNorm<1>();
    if (norm > bound)
      lo = penalty;
    else
      hi = penalty;
    if (std::abs(norm - bound) <= 1e-6 * bound) break;
  }
  eps = solve_penalized(hi);
  return project_l1_ball(eps, bound);
}

}  // namespace

ConstrainedStep constrained_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, double bound, Penalty penalty) {
  if (bound <= 0.0) throw config_error("constrained_step: bound must be positive");
  if (H.rows() != y.size() || offset.size() != y.size())
    throw data_error("constrained_step: dimension mismatch");

  ConstrainedStep out;
  Eigen::VectorXd prob0(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) prob0[i] = expit(offset[i]);
  Eigen::VectorXd score = H.transpose() * (y - prob0);
  out.score_norm_at_zero = score.norm();
  out.epsilon = Eigen::VectorXd::Zero(H.cols());
  if (out.score_norm_at_zero == 0.0) return out;

  auto penalty_norm = [&](const Eigen::VectorXd& v) {
    return penalty == Penalty::L2 ? v.norm() : v.lpNorm<1>();
  };

  // One Newton step from zero gates the full unconstrained fit: when even
  // the first step leaves the ball, so does the optimum for all practical
  // purposes and the constraint-active branch applies.
  Eigen::VectorXd w0(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    w0[i] = std::max(prob0[i] * (1.0 - prob0[i]), 1e-12);
  Eigen::MatrixXd info = H.transpose() * w0.asDiagonal() * H;
  bool probe_inside = false;
  {
    Eigen::MatrixXd jittered = info;
    jittered.diagonal().array() += 1e-10;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jittered);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd first_step = ldlt.solve(score);
      probe_inside = first_step.allFinite() && penalty_norm(first_step) <= bound;
    }
  }
  if (probe_inside) {
    LogisticFit unconstrained = fit_logistic(H, y, offset, Eigen::VectorXd::Ones(y.size()));
    double mle_norm = penalty_norm(unconstrained.coefficients);
    if (mle_norm <= bound) {
      out.epsilon = unconstrained.coefficients;
      out.norm = mle_norm;
      out.proposed_norm = mle_norm;
      return out;
    }
  }

  Eigen::VectorXd candidate;
  if (penalty == Penalty::L2) {
    candidate = ridge_step_to_bound(info, score, bound);
    if (!candidate.allFinite() || penalty_norm(candidate) == 0.0)
      candidate = (bound / score.norm()) * score;  // steepest-ascent fallback
  } else {
    candidate = l1_coordinate_step(info, score, bound);
    if (!candidate.allFinite() || penalty_norm(candidate) == 0.0)
      candidate = project_l1_ball(score, bound);
  }
  // the constraint is active here: land exactly on the boundary
  candidate *= bound / penalty_norm(candidate);
  out.proposed_norm = penalty_norm(candidate);

  double ll0 = bernoulli_loglik(y, offset);
  int halvings = 0;
  while (halvings < 60) {
    double ll = bernoulli_loglik(y, offset + H * candidate);
    if (ll >= ll0) break;
    candidate *= 0.5;
    ++halvings;
  }
  if (halvings >= 60) {
    out.epsilon = Eigen::VectorXd::Zero(H.cols());
    out.norm = 0.0;
    out.stalled = true;
    return out;
  }
  out.epsilon = candidate;
  out.norm = penalty_norm(candidate);
  return out;
}

}  // namespace moss
