#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace moss {

// Standard normal quantile, accurate to double precision.
double normal_quantile(double p);

struct BandResult {
  double alpha = 0.05;
  Eigen::VectorXd psi;
  Eigen::VectorXd se;               // sigma_t / sqrt(n)
  double pointwise_quantile = 0.0;  // q_{1-alpha/2}
  double simultaneous_quantile = 0.0;
  Eigen::VectorXd lo_pw, hi_pw;        // unclipped
  Eigen::VectorXd lo_simul, hi_simul;  // unclipped; empty when not computed
  Eigen::MatrixXd sigma;               // empirical EIF covariance, t_max x t_max
  int mc_draws = 0;
};

// Wald intervals psi(t) +/- q_{1-alpha/2} sigma_t / sqrt(n) with
// sigma_t^2 = mean_i D[i][t]^2.
BandResult pointwise_ci(const Eigen::MatrixXd& eif, const Eigen::VectorXd& psi, double alpha);

// Adds the simultaneous band: q_{1-alpha} is the empirical quantile of
// max_t |Z_t| for Z ~ N(0, rho), rho the EIF correlation matrix.
BandResult simultaneous_band(const Eigen::MatrixXd& eif, const Eigen::VectorXd& psi,
                             double alpha, int mc_draws = 10000, std::uint64_t seed = 1,
                             int threads = 1);

}  // namespace moss
