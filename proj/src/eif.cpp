#include "moss/eif.hpp"

#include <algorithm>
#include <cmath>

#include "moss/csvio.hpp"

namespace moss {

namespace {
constexpr double kSurvFloor = 1e-12;
}

Eigen::MatrixXd clever_col_factors(const Eigen::MatrixXd& survival,
                                   const Eigen::MatrixXd& censor_surv_left,
                                   const Eigen::VectorXd& g) {
  Eigen::MatrixXd factors(survival.rows(), survival.cols());
  for (Eigen::Index i = 0; i < survival.rows(); ++i)
    for (Eigen::Index k = 0; k < survival.cols(); ++k)
      factors(i, k) = -1.0 / (g[i] * censor_surv_left(i, k) *
                              std::max(survival(i, k), kSurvFloor));
  return factors;
}

CleverTensor clever_covariates(const SurvivalDataset& ds, int arm,
                               const Eigen::MatrixXd& survival,
                               const Eigen::MatrixXd& censor_surv_left,
                               const Eigen::VectorXd& g) {
  const int t_max = static_cast<int>(survival.cols());
  CleverTensor tensor;
  tensor.arm = arm;
  tensor.t_max = t_max;

  std::size_t total = 0;
  for (const auto& o : ds.observations) total += static_cast<std::size_t>(o.t_tilde);
  tensor.row_subject.reserve(total);
  tensor.row_k.reserve(total);
  tensor.h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), t_max);
  tensor.event = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));

  Eigen::MatrixXd factors = clever_col_factors(survival, censor_surv_left, g);
  Eigen::Index r = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const auto& o = ds.observations[i];
    for (int k = 1; k <= o.t_tilde; ++k, ++r) {
      tensor.row_subject.push_back(i);
      tensor.row_k.push_back(k);
      if (k == o.t_tilde && o.delta == 1) tensor.event[r] = 1.0;
      if (o.a != arm) continue;  // I(A = a): rows stay zero
      double f = factors(i, k - 1);
      for (int t = k; t <= t_max; ++t) tensor.h(r, t - 1) = f * survival(i, t - 1);
    }
  }
  return tensor;
}

Eigen::MatrixXd eif_matrix(const SurvivalDataset& ds, int arm, const Eigen::MatrixXd& hazard,
                           const Eigen::MatrixXd& survival,
                           const Eigen::MatrixXd& censor_surv_left, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& psi) {
  const int n = ds.n();
  const int t_max = static_cast<int>(survival.cols());
  if (psi.size() != t_max) throw data_error("eif_matrix: psi length mismatch");

  Eigen::MatrixXd eif(n, t_max);
  Eigen::VectorXd prefix(t_max);
  for (int i = 0; i < n; ++i) {
    const auto& o = ds.observations[i];
    if (o.a != arm) {
      for (int t = 1; t <= t_max; ++t) eif(i, t - 1) = survival(i, t - 1) - psi[t - 1];
      continue;
    }
    // prefix(m) = sum_{k<=m} F(i,k) * (N_ik - lambda(i,k)) over at-risk k
    double acc = 0.0;
    for (int k = 1; k <= t_max; ++k) {
      if (k <= o.t_tilde) {
        double event = (k == o.t_tilde && o.delta == 1) ? 1.0 : 0.0;
        double f = -1.0 / (g[i] * censor_surv_left(i, k - 1) *
                           std::max(survival(i, k - 1), kSurvFloor));
        acc += f * (event - hazard(i, k - 1));
      }
      prefix[k - 1] = acc;
    }
    for (int t = 1; t <= t_max; ++t)
      eif(i, t - 1) = survival(i, t - 1) * prefix[t - 1] + survival(i, t - 1) - psi[t - 1];
  }
  return eif;
}

std::vector<InverseWeightRow> inverse_weight_summary(const NuisancePredictions& pred) {
  const int n = static_cast<int>(pred.g.size());
  std::vector<InverseWeightRow> rows;
  rows.reserve(pred.t_max);
  std::vector<double> weights(n);
  for (int t = 1; t <= pred.t_max; ++t) {
    for (int i = 0; i < n; ++i)
      weights[i] = 1.0 / (pred.g[i] * std::max(pred.censor_surv(i, t - 1), kSurvFloor));
    std::sort(weights.begin(), weights.end());

    InverseWeightRow row;
    row.t = t;
    double sum = 0.0;
    for (double w : weights) sum += w;
    row.mean = sum / n;
    double ss = 0.0;
    for (double w : weights) ss += (w - row.mean) * (w - row.mean);
    row.sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    row.min = weights.front();
    row.max = weights.back();
    // type-7 quantiles, matching common statistical software defaults
    auto quantile = [&](double p) {
      double pos = p * (n - 1);
      int lo = static_cast<int>(std::floor(pos));
      int hi = std::min(lo + 1, n - 1);
      double frac = pos - lo;
      return weights[lo] * (1.0 - frac) + weights[hi] * frac;
    };
    row.q25 = quantile(0.25);
    row.q75 = quantile(0.75);
    rows.push_back(row);
  }
  return rows;
}

void write_inverse_weight_csv(const std::string& path,
                              const std::vector<InverseWeightRow>& rows) {
  CsvWriter out(path);
  out.row({"Time", "Mean", "St.Dev.", "Min", "Pctl(25)", "Pctl(75)", "Max"});
  for (const auto& r : rows)
    out.row({std::to_string(r.t), fmt_num(r.mean), fmt_num(r.sd), fmt_num(r.min),
             fmt_num(r.q25), fmt_num(r.q75), fmt_num(r.max)});
}

}  // namespace moss
