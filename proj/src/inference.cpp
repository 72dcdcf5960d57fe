#include "moss/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "moss/errors.hpp"
#include "moss/glm.hpp"
#include "moss/parallel.hpp"
#include "moss/rng.hpp"

namespace moss {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

constexpr double kDegenerateVar = 1e-14;

// Lower Cholesky; returns the 1-based index of the failing leading minor,
// or 0 on success.
int cholesky_lower(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower) {
  const Eigen::Index m = a.rows();
  lower = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double diag = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(diag > 0.0)) return static_cast<int>(j + 1);
    lower(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      double v = a(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j));
      lower(i, j) = v / lower(j, j);
    }
  }
  return 0;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw config_error("normal_quantile: p must be in (0,1)");
  // asymptotic start, then Newton on the CDF
  double q = std::min(p, 1.0 - p);
  double x = std::sqrt(-2.0 * std::log(q));
  x = x - (2.515517 + 0.802853 * x + 0.010328 * x * x) /
              (1.0 + 1.432788 * x + 0.189269 * x * x + 0.001308 * x * x * x);
  if (p < 0.5) x = -x;
  for (int it = 0; it < 6; ++it) {
    double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (density < 1e-300) break;
    double step = (normal_cdf(x) - p) / density;
    x -= step;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

BandResult pointwise_ci(const Eigen::MatrixXd& eif, const Eigen::VectorXd& psi, double alpha) {
  const Eigen::Index n = eif.rows();
  const Eigen::Index t_max = eif.cols();
  if (n < 2) throw data_error("pointwise_ci: need at least 2 observations");
  if (psi.size() != t_max) throw data_error("pointwise_ci: psi length mismatch");

  BandResult out;
  out.alpha = alpha;
  out.psi = psi;
  out.sigma = (eif.transpose() * eif) / static_cast<double>(n);
  out.se.resize(t_max);
  for (Eigen::Index t = 0; t < t_max; ++t)
    out.se[t] = std::sqrt(std::max(out.sigma(t, t), 0.0) / static_cast<double>(n));
  out.pointwise_quantile = normal_quantile(1.0 - alpha / 2.0);
  out.lo_pw = psi - out.pointwise_quantile * out.se;
  out.hi_pw = psi + out.pointwise_quantile * out.se;
  return out;
}

BandResult simultaneous_band(const Eigen::MatrixXd& eif, const Eigen::VectorXd& psi,
                             double alpha, int mc_draws, std::uint64_t seed, int threads) {
  BandResult out = pointwise_ci(eif, psi, alpha);
  const Eigen::Index t_max = eif.cols();
  out.mc_draws = mc_draws;

  // correlation matrix; degenerate rows become unit rows
  Eigen::MatrixXd rho(t_max, t_max);
  for (Eigen::Index s = 0; s < t_max; ++s) {
    for (Eigen::Index t = 0; t < t_max; ++t) {
      double vs = out.sigma(s, s), vt = out.sigma(t, t);
      if (vs < kDegenerateVar || vt < kDegenerateVar)
        rho(s, t) = (s == t) ? 1.0 : 0.0;
      else
        rho(s, t) = out.sigma(s, t) / std::sqrt(vs * vt);
    }
  }

  Eigen::MatrixXd lower;
  int failed_minor = 0;
  bool ok = false;
  for (double jitter = 1e-10; jitter <= 1.0001e-6; jitter *= 100.0) {
    Eigen::MatrixXd jittered = rho + jitter * Eigen::MatrixXd::Identity(t_max, t_max);
    failed_minor = cholesky_lower(jittered, lower);
    if (failed_minor == 0) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw numeric_error("correlation matrix not positive definite; leading minor " +
                        std::to_string(failed_minor) + " failed after jitter 1e-6");

  // one substream per draw: the result is independent of the partitioning
  std::vector<double> maxima(mc_draws);
  parallel_for(mc_draws, threads, [&](int d) {
    std::mt19937_64 engine = substream(seed, static_cast<std::uint64_t>(d));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(t_max);
    for (Eigen::Index t = 0; t < t_max; ++t) xi[t] = normal(engine);
    double m = 0.0;
    for (Eigen::Index t = 0; t < t_max; ++t) {
      double z = lower.row(t).head(t + 1).dot(xi.head(t + 1));
      m = std::max(m, std::abs(z));
    }
    maxima[d] = m;
  });
  std::sort(maxima.begin(), maxima.end());
  int rank = static_cast<int>(std::ceil((1.0 - alpha) * mc_draws));
  rank = std::clamp(rank, 1, mc_draws);
  out.simultaneous_quantile = maxima[rank - 1];

  out.lo_simul = psi - out.simultaneous_quantile * out.se;
  out.hi_simul = psi + out.simultaneous_quantile * out.se;
  return out;
}

}  // namespace moss
