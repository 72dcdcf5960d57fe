#include "moss/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "moss/csvio.hpp"

namespace moss {

int SurvivalDataset::covariate_index(const std::string& name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j)
    if (covariate_names[j] == name) return static_cast<int>(j);
  throw data_error("unknown covariate: " + name);
}

void SurvivalDataset::validate() const {
  std::set<int> ids;
  for (const auto& o : observations) {
    if (o.t_tilde < 1 || o.t_tilde > t_max)
      throw data_error("observation time outside 1..t_max");
    if (o.delta != 0 && o.delta != 1) throw data_error("delta must be 0 or 1");
    if (o.a != 0 && o.a != 1) throw data_error("treatment must be 0 or 1");
    if (o.w.size() != covariate_names.size())
      throw data_error("covariate dimension mismatch");
    if (!ids.insert(o.id).second) throw data_error("duplicate subject id");
  }
}

namespace {

bool is_missing(const std::string& field) {
  if (field.empty()) return true;
  std::string low;
  for (char c : field) low.push_back(static_cast<char>(std::tolower(c)));
  return low == "na" || low == "nan" || low == "null";
}

double parse_double(const std::string& field, int line, const std::string& col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw data_error("line " + std::to_string(line) + ": cannot parse '" + field +
                     "' in column " + col);
  }
}

int parse_binary(const std::string& field, int line, const std::string& col) {
  double v = parse_double(field, line, col);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw data_error("column " + col + " must be binary 0/1, got '" + field + "' at line " +
                   std::to_string(line));
}

}  // namespace

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  CsvTable table = read_csv(path);

  auto require_col = [&](const std::string& name) {
    int j = table.column(name);
    if (j < 0) throw data_error("missing column: " + name);
    return j;
  };
  int time_j = require_col(schema.time_col);
  int event_j = require_col(schema.event_col);
  int treat_j = require_col(schema.treatment_col);
  int id_j = schema.id_col.empty() ? -1 : require_col(schema.id_col);
  std::vector<int> cov_j;
  for (const auto& c : schema.covariate_cols) cov_j.push_back(require_col(c));

  SurvivalDataset ds;
  ds.covariate_names = schema.covariate_cols;

  int line = 1;  // header is line 1
  int next_id = 1;
  for (const auto& row : table.rows) {
    ++line;
    if (row.size() != table.header.size())
      throw data_error("line " + std::to_string(line) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(row.size()));
    bool missing = is_missing(row[time_j]) || is_missing(row[event_j]) ||
                   is_missing(row[treat_j]);
    for (int j : cov_j) missing = missing || is_missing(row[j]);
    if (missing) {
      ++ds.dropped_rows;
      continue;
    }

    Observation o;
    double t = parse_double(row[time_j], line, schema.time_col);
    if (t <= 0.0) throw data_error("line " + std::to_string(line) + ": time must be positive");
    double t_int;
    if (std::modf(t, &t_int) != 0.0) {
      if (!schema.discretize_ceil)
        throw data_error("line " + std::to_string(line) +
                         ": non-integer time requires the ceil discretizer");
      t = std::ceil(t);
    }
    o.t_tilde = static_cast<int>(t);
    o.delta = parse_binary(row[event_j], line, schema.event_col);
    o.a = parse_binary(row[treat_j], line, schema.treatment_col);
    o.id = id_j >= 0 ? static_cast<int>(parse_double(row[id_j], line, schema.id_col)) : next_id;
    ++next_id;
    for (int j : cov_j) o.w.push_back(parse_double(row[j], line, table.header[j]));
    ds.observations.push_back(std::move(o));
  }

  if (ds.observations.empty()) throw data_error("no usable rows in " + path);
  ds.t_max = 0;
  for (const auto& o : ds.observations) ds.t_max = std::max(ds.t_max, o.t_tilde);
  ds.validate();
  return ds;
}

SurvivalDataset preprocess(const SurvivalDataset& ds, std::optional<int> truncate_at,
                           int rescale) {
  if (truncate_at && *truncate_at < 1) throw config_error("truncate_at must be >= 1");
  if (rescale < 1) throw config_error("rescale must be >= 1");
  PreprocessArgs args{truncate_at, rescale};
  if (ds.preprocess_applied && *ds.preprocess_applied == args) return ds;

  SurvivalDataset out = ds;
  for (auto& o : out.observations) {
    if (truncate_at && o.t_tilde > *truncate_at) {
      o.t_tilde = *truncate_at;
      o.delta = 0;
    }
    if (rescale > 1)
      o.t_tilde = static_cast<int>(std::ceil(static_cast<double>(o.t_tilde) / rescale));
  }
  out.t_max = 0;
  for (const auto& o : out.observations) out.t_max = std::max(out.t_max, o.t_tilde);
  out.preprocess_applied = args;
  return out;
}

std::vector<LongRow> to_long(const SurvivalDataset& ds) {
  std::vector<LongRow> rows;
  std::size_t total = 0;
  for (const auto& o : ds.observations) total += static_cast<std::size_t>(o.t_tilde);
  rows.reserve(total);
  for (int i = 0; i < ds.n(); ++i) {
    const auto& o = ds.observations[i];
    for (int k = 1; k <= o.t_tilde; ++k) {
      LongRow r;
      r.id = o.id;
      r.subject = i;
      r.k = k;
      r.dN = (k == o.t_tilde && o.delta == 1) ? 1 : 0;
      r.dAc = (k == o.t_tilde && o.delta == 0) ? 1 : 0;
      r.at_risk = 1;
      r.a = o.a;
      r.w = o.w;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

void write_long_csv(const std::string& path, const SurvivalDataset& ds) {
  CsvWriter out(path);
  std::vector<std::string> header = {"id", "k", "dN", "dAc", "a"};
  for (std::size_t j = 0; j < ds.covariate_names.size(); ++j)
    header.push_back("w" + std::to_string(j + 1));
  out.row(header);
  for (const auto& r : to_long(ds)) {
    std::vector<std::string> fields = {std::to_string(r.id), std::to_string(r.k),
                                       std::to_string(r.dN), std::to_string(r.dAc),
                                       std::to_string(r.a)};
    for (double v : r.w) fields.push_back(fmt_num(v));
    out.row(fields);
  }
}

}  // namespace moss
