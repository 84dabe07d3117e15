#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emrkit/bench/fixture.hpp"
#include "emrkit/bench/gold.hpp"
#include "emrkit/format.hpp"
#include "emrkit/json.hpp"

namespace emrkit::bench {

struct CohortEvaluation {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double format_accuracy = 0.0;
  std::size_t predicted_unique = 0;
  std::size_t gold_size = 0;
  std::size_t intersection = 0;
  bool had_duplicate_ids = false;
  bool empty_prediction = false;

  Json to_json() const;
};

// Scores a predicted feature table against the gold cohort. Membership is
// judged on the set of unique stay ids; format accuracy is judged on the
// intersection, canonical cell by canonical cell.
CohortEvaluation evaluate_cohort(const std::vector<std::vector<std::string>>& predicted_rows,
                                 const GoldCohort& gold,
                                 const FeatureFormatSpec& format_spec);

struct ColumnFormatReport {
  std::string feature_name;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::string first_offending_value;
};

struct FormatValidation {
  bool all_pass = true;
  std::size_t column_count_expected = 0;
  std::size_t column_count_actual = 0;
  std::vector<ColumnFormatReport> columns;

  Json to_json() const;
};

FormatValidation validate_feature_formats(const std::vector<std::vector<std::string>>& rows,
                                          const FeatureFormatSpec& format_spec);

struct MappingEvaluation {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t true_negatives = 0;
  std::vector<std::string> out_of_universe;

  Json to_json() const;
};

// Micro-averaged item F1 over all features plus balanced accuracy, where the
// negative universe for each feature is every fixture item that is not gold
// for it. Absent features contribute a presence decision: predicting empty is
// the true negative, predicting anything is a false positive.
MappingEvaluation evaluate_mapping(const std::map<std::string, MappingItem>& predicted,
                                   const MappingGold& gold);

struct TrialStats {
  std::vector<double> scores;
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  int failures = 0;

  Json to_json() const;
};

// Runs `runner` for trial indices [0, trials); nullopt counts as a failed
// trial scored 0. The stderr uses the sample standard deviation over sqrt(n).
TrialStats run_trials(int trials, const std::function<std::optional<double>(int)>& runner);

double mean_of(const std::vector<double>& xs);
double stderr_of(const std::vector<double>& xs);

}  // namespace emrkit::bench
