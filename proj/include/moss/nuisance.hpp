#pragma once

#include <Eigen/Dense>

#include "moss/basis.hpp"
#include "moss/dataset.hpp"
#include "moss/glm.hpp"

namespace moss {

// Pooled discrete-time hazard model: logistic in a basis of (t, A, W).
// Design columns are centered at fit time; predictions are clamped.
struct HazardModel {
  ResolvedBasis basis;
  Eigen::VectorXd coefficients;
  Eigen::RowVectorXd centers;
  double clamp_lo = 1e-5;
  double clamp_hi = 1.0 - 1e-5;
  bool converged = false;

  double predict(int k, int a, const std::vector<double>& w) const;
};

struct PropensityModel {
  ResolvedBasis basis;
  Eigen::VectorXd coefficients;
  Eigen::RowVectorXd centers;
  double g_lo = 0.01;
  double g_hi = 0.99;
  bool converged = false;

  double predict(const std::vector<double>& w) const;
};

// The empirical covariate distribution is the dataset itself (weight 1/n).
struct NuisanceFit {
  HazardModel failure_hazard;
  HazardModel censor_hazard;
  PropensityModel propensity;
};

struct HazardClamp {
  double lo = 1e-5;
  double hi = 1.0 - 1e-5;
};

struct PropensityBounds {
  double lo = 0.01;
  double hi = 0.99;
};

HazardModel fit_failure_hazard(const SurvivalDataset& ds, const std::vector<LongRow>& long_rows,
                               const BasisSpec& basis, HazardClamp clamp = {});
HazardModel fit_censor_hazard(const SurvivalDataset& ds, const std::vector<LongRow>& long_rows,
                              const BasisSpec& basis, HazardClamp clamp = {});
PropensityModel fit_propensity(const SurvivalDataset& ds, const BasisSpec& basis,
                               PropensityBounds bounds = {});

NuisanceFit fit_nuisance(const SurvivalDataset& ds, const BasisSpec& hazard_basis,
                         const BasisSpec& censor_basis, const BasisSpec& propensity_basis,
                         HazardClamp clamp = {}, PropensityBounds bounds = {});

// S(t) = prod_{k<=t} (1 - lambda(k)), with S(0) = 1.
Eigen::VectorXd hazard_to_survival(const Eigen::VectorXd& hazard);

// Per-subject grids under treatment fixed to `arm`, for every subject.
struct NuisancePredictions {
  int arm = 1;
  int t_max = 0;
  Eigen::MatrixXd hazard;            // lambda_N(k | a, W_i), n x t_max
  Eigen::MatrixXd survival;          // S_N(k | a, W_i)
  Eigen::MatrixXd censor_surv_left;  // S_Ac(k-1 | a, W_i), column k; S_Ac(0) = 1
  Eigen::MatrixXd censor_surv;       // S_Ac(k | a, W_i)
  Eigen::VectorXd g;                 // P(A = a | W_i), clamped
};

NuisancePredictions predict_matrices(const NuisanceFit& fit, const SurvivalDataset& ds, int arm);

// Survival matrix from a hazard matrix, row-wise cumulative product.
Eigen::MatrixXd survival_from_hazard(const Eigen::MatrixXd& hazard);

}  // namespace moss
