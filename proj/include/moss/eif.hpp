#pragma once

#include <Eigen/Dense>

#include "moss/dataset.hpp"
#include "moss/nuisance.hpp"

namespace moss {

// Clever covariates for the pooled regression: one row per person-time
// contribution (i, k) with k <= t_tilde_i, one column per target time t'.
// Rows of subjects outside the target arm are identically zero, as are
// entries with k > t'.
struct CleverTensor {
  int arm = 1;
  int t_max = 0;
  std::vector<int> row_subject;  // R entries, index into observations
  std::vector<int> row_k;        // 1-based contribution time
  Eigen::MatrixXd h;             // R x t_max
  Eigen::VectorXd event;         // N_(i,k) = I(t_tilde_i = k, delta_i = 1)

  double value(int row, int target_t) const { return h(row, target_t - 1); }
};

// Shared factorization: h[i](k, t') = F(i, k) * S(i, t') for k <= t', where
// F(i, k) = -1 / (g_a(W_i) * S_Ac(k- | a, W_i) * S_N(k | a, W_i)).
Eigen::MatrixXd clever_col_factors(const Eigen::MatrixXd& survival,
                                   const Eigen::MatrixXd& censor_surv_left,
                                   const Eigen::VectorXd& g);

// Tensor evaluated at the given survival matrix (the targeting loops pass
// the current iterate; g and the censoring survival stay at their initial
// fit). Rows cover every subject, k = 1..t_tilde_i.
CleverTensor clever_covariates(const SurvivalDataset& ds, int arm,
                               const Eigen::MatrixXd& survival,
                               const Eigen::MatrixXd& censor_surv_left,
                               const Eigen::VectorXd& g);

// Efficient influence values D[i][t] at the given hazard/survival state and
// centering curve psi.
Eigen::MatrixXd eif_matrix(const SurvivalDataset& ds, int arm, const Eigen::MatrixXd& hazard,
                           const Eigen::MatrixXd& survival,
                           const Eigen::MatrixXd& censor_surv_left, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& psi);

struct InverseWeightRow {
  int t = 0;
  double mean = 0, sd = 0, min = 0, q25 = 0, q75 = 0, max = 0;
};

// Distribution of 1 / (g_a(W) * S_Ac(t | a, W)) per time point.
std::vector<InverseWeightRow> inverse_weight_summary(const NuisancePredictions& pred);

void write_inverse_weight_csv(const std::string& path,
                              const std::vector<InverseWeightRow>& rows);

}  // namespace moss
