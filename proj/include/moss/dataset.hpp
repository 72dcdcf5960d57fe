#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moss/errors.hpp"

namespace moss {

// One right-censored observation on the integer time grid.
struct Observation {
  int id = 0;
  std::vector<double> w;
  int a = 0;        // treatment in {0,1}
  int t_tilde = 1;  // follow-up time, 1..t_max
  int delta = 0;    // 1 = failure observed, 0 = censored
};

struct PreprocessArgs {
  std::optional<int> truncate_at;
  int rescale = 1;
  bool operator==(const PreprocessArgs&) const = default;
};

struct SurvivalDataset {
  std::vector<Observation> observations;
  int t_max = 0;
  std::vector<std::string> covariate_names;
  int dropped_rows = 0;  // complete-case drops during ingestion
  std::optional<PreprocessArgs> preprocess_applied;

  int n() const { return static_cast<int>(observations.size()); }
  int n_covariates() const { return static_cast<int>(covariate_names.size()); }
  int covariate_index(const std::string& name) const;
  void validate() const;
};

// One person-time row of the long (pooled classification) format.
struct LongRow {
  int id = 0;
  int subject = 0;  // index into observations
  int k = 1;
  int dN = 0;
  int dAc = 0;
  int at_risk = 1;
  int a = 0;
  std::vector<double> w;
};

struct CsvSchema {
  std::string time_col = "time";
  std::string event_col = "event";
  std::string treatment_col = "a";
  std::vector<std::string> covariate_cols;
  std::string id_col;              // optional; row order used when empty
  bool discretize_ceil = false;    // allow positive real times, mapped by ceil
};

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema);

// Administrative truncation then time rescaling t -> ceil(t / rescale).
// Reapplying with identical arguments is a no-op.
SurvivalDataset preprocess(const SurvivalDataset& ds, std::optional<int> truncate_at,
                           int rescale = 1);

std::vector<LongRow> to_long(const SurvivalDataset& ds);

void write_long_csv(const std::string& path, const SurvivalDataset& ds);

}  // namespace moss
