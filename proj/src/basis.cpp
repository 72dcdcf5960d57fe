#include "moss/basis.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace moss {

using nlohmann::json;

BasisTerm BasisTerm::time_poly(int degree) {
  BasisTerm t;
  t.kind = Kind::TimePoly;
  t.degree = degree;
  return t;
}
BasisTerm BasisTerm::log_time() {
  BasisTerm t;
  t.kind = Kind::LogTime;
  return t;
}
BasisTerm BasisTerm::treatment() {
  BasisTerm t;
  t.kind = Kind::Treatment;
  return t;
}
BasisTerm BasisTerm::covariate(const std::string& name) {
  BasisTerm t;
  t.kind = Kind::Covariate;
  t.name = name;
  return t;
}
BasisTerm BasisTerm::indicator(const std::string& name, double threshold) {
  BasisTerm t;
  t.kind = Kind::Indicator;
  t.name = name;
  t.threshold = threshold;
  return t;
}
BasisTerm BasisTerm::treat_time() {
  BasisTerm t;
  t.kind = Kind::TreatTime;
  return t;
}

int BasisSpec::n_columns() const {
  int cols = 0;
  for (const auto& t : terms)
    cols += (t.kind == BasisTerm::Kind::TimePoly) ? t.degree : 1;
  return cols;
}

namespace {

std::string kind_name(BasisTerm::Kind k) {
  switch (k) {
    case BasisTerm::Kind::TimePoly: return "time_poly";
    case BasisTerm::Kind::LogTime: return "log_time";
    case BasisTerm::Kind::Treatment: return "treatment";
    case BasisTerm::Kind::Covariate: return "covariate";
    case BasisTerm::Kind::Indicator: return "indicator";
    case BasisTerm::Kind::TreatTime: return "treat_time";
  }
  return "?";
}

BasisTerm::Kind kind_from_name(const std::string& s) {
  if (s == "time_poly") return BasisTerm::Kind::TimePoly;
  if (s == "log_time") return BasisTerm::Kind::LogTime;
  if (s == "treatment") return BasisTerm::Kind::Treatment;
  if (s == "covariate") return BasisTerm::Kind::Covariate;
  if (s == "indicator") return BasisTerm::Kind::Indicator;
  if (s == "treat_time") return BasisTerm::Kind::TreatTime;
  throw config_error("unknown basis term type: " + s);
}

}  // namespace

std::string BasisSpec::to_json() const {
  json arr = json::array();
  for (const auto& t : terms) {
    json item;
    item["type"] = kind_name(t.kind);
    if (t.kind == BasisTerm::Kind::TimePoly) item["degree"] = t.degree;
    if (t.kind == BasisTerm::Kind::Covariate || t.kind == BasisTerm::Kind::Indicator)
      item["name"] = t.name;
    if (t.kind == BasisTerm::Kind::Indicator) item["threshold"] = t.threshold;
    arr.push_back(item);
  }
  return arr.dump();
}

BasisSpec BasisSpec::from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("basis json: ") + e.what());
  }
  if (!arr.is_array()) throw config_error("basis json must be an array of terms");
  BasisSpec spec;
  for (const auto& item : arr) {
    BasisTerm t;
    t.kind = kind_from_name(item.at("type").get<std::string>());
    if (t.kind == BasisTerm::Kind::TimePoly) t.degree = item.value("degree", 1);
    if (t.kind == BasisTerm::Kind::Covariate || t.kind == BasisTerm::Kind::Indicator)
      t.name = item.at("name").get<std::string>();
    if (t.kind == BasisTerm::Kind::Indicator) t.threshold = item.at("threshold").get<double>();
    if (t.kind == BasisTerm::Kind::TimePoly && (t.degree < 1 || t.degree > 3))
      throw config_error("time_poly degree must be in 1..3");
    spec.terms.push_back(t);
  }
  return spec;
}

BasisSpec BasisSpec::default_hazard(const std::vector<std::string>& covariate_names) {
  BasisSpec spec;
  spec.terms.push_back(BasisTerm::time_poly(3));
  spec.terms.push_back(BasisTerm::treatment());
  for (const auto& c : covariate_names) spec.terms.push_back(BasisTerm::covariate(c));
  return spec;
}

BasisSpec BasisSpec::default_propensity(const std::vector<std::string>& covariate_names) {
  BasisSpec spec;
  for (const auto& c : covariate_names) spec.terms.push_back(BasisTerm::covariate(c));
  return spec;
}

ResolvedBasis::ResolvedBasis(const BasisSpec& spec, const SurvivalDataset& ds, double t_ref,
                             bool allow_time_terms)
    : spec_(spec), t_ref_(t_ref > 0 ? t_ref : 1.0) {
  for (const auto& t : spec_.terms) {
    bool time_term = t.kind == BasisTerm::Kind::TimePoly || t.kind == BasisTerm::Kind::LogTime ||
                     t.kind == BasisTerm::Kind::TreatTime ||
                     t.kind == BasisTerm::Kind::Treatment;
    if (time_term && !allow_time_terms)
      throw config_error("propensity basis cannot contain time or treatment terms");
    if (t.kind == BasisTerm::Kind::Covariate || t.kind == BasisTerm::Kind::Indicator)
      cov_index_.push_back(ds.covariate_index(t.name));
    else
      cov_index_.push_back(-1);
  }
  n_columns_ = spec_.n_columns();
}

void ResolvedBasis::fill_row(double k, int a, const std::vector<double>& w, RowRef out) const {
  int col = 0;
  double u = k / t_ref_;
  for (std::size_t j = 0; j < spec_.terms.size(); ++j) {
    const auto& t = spec_.terms[j];
    switch (t.kind) {
      case BasisTerm::Kind::TimePoly: {
        double v = 1.0;
        for (int d = 0; d < t.degree; ++d) {
          v *= u;
          out[col++] = v;
        }
        break;
      }
      case BasisTerm::Kind::LogTime:
        out[col++] = std::log(k);
        break;
      case BasisTerm::Kind::Treatment:
        out[col++] = static_cast<double>(a);
        break;
      case BasisTerm::Kind::Covariate:
        out[col++] = w[cov_index_[j]];
        break;
      case BasisTerm::Kind::Indicator:
        out[col++] = w[cov_index_[j]] > t.threshold ? 1.0 : 0.0;
        break;
      case BasisTerm::Kind::TreatTime:
        out[col++] = static_cast<double>(a) * u;
        break;
    }
  }
}

}  // namespace moss
