#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moss/dataset.hpp"

namespace moss {

// One term of the logistic design. The intercept is always present and is
// not listed. Time enters normalized as t/t_ref (polynomials) or log(t).
struct BasisTerm {
  enum class Kind { TimePoly, LogTime, Treatment, Covariate, Indicator, TreatTime };
  Kind kind = Kind::Covariate;
  int degree = 1;          // TimePoly only
  std::string name;        // Covariate / Indicator
  double threshold = 0.0;  // Indicator: I(w > threshold)

  static BasisTerm time_poly(int degree);
  static BasisTerm log_time();
  static BasisTerm treatment();
  static BasisTerm covariate(const std::string& name);
  static BasisTerm indicator(const std::string& name, double threshold);
  static BasisTerm treat_time();
};

struct BasisSpec {
  std::vector<BasisTerm> terms;

  int n_columns() const;
  // Serialization of the term list (External Interfaces: CLI config JSON).
  std::string to_json() const;
  static BasisSpec from_json(const std::string& text);

  // Main terms in time (cubic), treatment, and every covariate.
  static BasisSpec default_hazard(const std::vector<std::string>& covariate_names);
  static BasisSpec default_propensity(const std::vector<std::string>& covariate_names);
};

// Basis with covariate names resolved against a dataset; fills design rows.
class ResolvedBasis {
 public:
  ResolvedBasis() = default;
  ResolvedBasis(const BasisSpec& spec, const SurvivalDataset& ds, double t_ref,
                bool allow_time_terms);

  int n_columns() const { return n_columns_; }
  double t_ref() const { return t_ref_; }
  const BasisSpec& spec() const { return spec_; }

  // Design row (without intercept) for time k, treatment a, covariates w.
  // The Ref accepts strided blocks such as matrix rows.
  using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
  void fill_row(double k, int a, const std::vector<double>& w, RowRef out) const;

 private:
  BasisSpec spec_;
  std::vector<int> cov_index_;  // per term, -1 when unused
  double t_ref_ = 1.0;
  int n_columns_ = 0;
};

}  // namespace moss
