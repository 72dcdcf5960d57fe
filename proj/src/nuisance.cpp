#include "moss/nuisance.hpp"

#include <algorithm>
#include <cmath>

namespace moss {

namespace {

double clamp_to(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct CenteredFit {
  Eigen::VectorXd coefficients;
  Eigen::RowVectorXd centers;
  bool converged = false;
};

CenteredFit fit_centered(Eigen::MatrixXd X, const Eigen::VectorXd& y) {
  CenteredFit out;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols() - 1;  // last column is the intercept
  out.centers = Eigen::RowVectorXd::Zero(p + 1);
  if (p > 0) {
    out.centers.head(p) = X.leftCols(p).colwise().mean();
    X.leftCols(p).rowwise() -= out.centers.head(p);
  }
  LogisticFit fit =
      fit_logistic(X, y, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n));
  out.coefficients = fit.coefficients;
  out.converged = fit.converged;
  return out;
}

HazardModel fit_hazard_impl(const SurvivalDataset& ds, const std::vector<LongRow>& long_rows,
                            const BasisSpec& basis, HazardClamp clamp, bool censoring) {
  if (long_rows.empty()) throw data_error("hazard fit: no at-risk rows");
  ResolvedBasis resolved(basis, ds, static_cast<double>(ds.t_max), true);
  const Eigen::Index n = static_cast<Eigen::Index>(long_rows.size());
  const int p = resolved.n_columns();
  Eigen::MatrixXd X(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const LongRow& row = long_rows[r];
    resolved.fill_row(row.k, row.a, row.w, X.row(r).head(p));
    X(r, p) = 1.0;
    y[r] = censoring ? row.dAc : row.dN;
  }
  CenteredFit fit = fit_centered(std::move(X), y);
  HazardModel model;
  model.basis = resolved;
  model.coefficients = fit.coefficients;
  model.centers = fit.centers;
  model.clamp_lo = clamp.lo;
  model.clamp_hi = clamp.hi;
  model.converged = fit.converged;
  return model;
}

}  // namespace

double HazardModel::predict(int k, int a, const std::vector<double>& w) const {
  const int p = basis.n_columns();
  Eigen::RowVectorXd row(p + 1);
  basis.fill_row(k, a, w, row.head(p));
  row[p] = 1.0;
  double eta = (row - centers).dot(coefficients);
  return clamp_to(expit(eta), clamp_lo, clamp_hi);
}

double PropensityModel::predict(const std::vector<double>& w) const {
  const int p = basis.n_columns();
  Eigen::RowVectorXd row(p + 1);
  basis.fill_row(1.0, 0, w, row.head(p));
  row[p] = 1.0;
  double eta = (row - centers).dot(coefficients);
  return clamp_to(expit(eta), g_lo, g_hi);
}

HazardModel fit_failure_hazard(const SurvivalDataset& ds, const std::vector<LongRow>& long_rows,
                               const BasisSpec& basis, HazardClamp clamp) {
  return fit_hazard_impl(ds, long_rows, basis, clamp, false);
}

HazardModel fit_censor_hazard(const SurvivalDataset& ds, const std::vector<LongRow>& long_rows,
                              const BasisSpec& basis, HazardClamp clamp) {
  return fit_hazard_impl(ds, long_rows, basis, clamp, true);
}

PropensityModel fit_propensity(const SurvivalDataset& ds, const BasisSpec& basis,
                               PropensityBounds bounds) {
  int treated = 0;
  for (const auto& o : ds.observations) treated += o.a;
  if (treated == 0 || treated == ds.n())
    throw data_error("propensity fit requires both treatment arms");

  ResolvedBasis resolved(basis, ds, 1.0, false);
  const Eigen::Index n = ds.n();
  const int p = resolved.n_columns();
  Eigen::MatrixXd X(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[i];
    resolved.fill_row(1.0, 0, o.w, X.row(i).head(p));
    X(i, p) = 1.0;
    y[i] = o.a;
  }
  CenteredFit fit = fit_centered(std::move(X), y);
  PropensityModel model;
  model.basis = resolved;
  model.coefficients = fit.coefficients;
  model.centers = fit.centers;
  model.g_lo = bounds.lo;
  model.g_hi = bounds.hi;
  model.converged = fit.converged;
  return model;
}

NuisanceFit fit_nuisance(const SurvivalDataset& ds, const BasisSpec& hazard_basis,
                         const BasisSpec& censor_basis, const BasisSpec& propensity_basis,
                         HazardClamp clamp, PropensityBounds bounds) {
  std::vector<LongRow> long_rows = to_long(ds);
  NuisanceFit fit;
  fit.failure_hazard = fit_failure_hazard(ds, long_rows, hazard_basis, clamp);
  fit.censor_hazard = fit_censor_hazard(ds, long_rows, censor_basis, clamp);
  fit.propensity = fit_propensity(ds, propensity_basis, bounds);
  return fit;
}

Eigen::VectorXd hazard_to_survival(const Eigen::VectorXd& hazard) {
  Eigen::VectorXd surv(hazard.size());
  double s = 1.0;
  for (Eigen::Index k = 0; k < hazard.size(); ++k) {
    s *= 1.0 - hazard[k];
    surv[k] = s;
  }
  return surv;
}

Eigen::MatrixXd survival_from_hazard(const Eigen::MatrixXd& hazard) {
  Eigen::MatrixXd surv(hazard.rows(), hazard.cols());
  for (Eigen::Index i = 0; i < hazard.rows(); ++i) {
    double s = 1.0;
    for (Eigen::Index k = 0; k < hazard.cols(); ++k) {
      s *= 1.0 - hazard(i, k);
      surv(i, k) = s;
    }
  }
  return surv;
}

NuisancePredictions predict_matrices(const NuisanceFit& fit, const SurvivalDataset& ds, int arm) {
  const int n = ds.n();
  const int t_max = ds.t_max;
  NuisancePredictions out;
  out.arm = arm;
  out.t_max = t_max;
  out.hazard.resize(n, t_max);
  out.censor_surv.resize(n, t_max);
  out.censor_surv_left.resize(n, t_max);
  out.g.resize(n);

  for (int i = 0; i < n; ++i) {
    const auto& o = ds.observations[i];
    double g1 = fit.propensity.predict(o.w);
    out.g[i] = arm == 1 ? g1 : 1.0 - g1;
    double sc = 1.0;
    for (int k = 1; k <= t_max; ++k) {
      out.hazard(i, k - 1) = fit.failure_hazard.predict(k, arm, o.w);
      out.censor_surv_left(i, k - 1) = sc;  // S_Ac(k-1), so column 1 holds S_Ac(0) = 1
      sc *= 1.0 - fit.censor_hazard.predict(k, arm, o.w);
      out.censor_surv(i, k - 1) = sc;
    }
  }
  out.survival = survival_from_hazard(out.hazard);
  return out;
}

}  // namespace moss
