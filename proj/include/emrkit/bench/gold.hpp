#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emrkit/bench/fixture.hpp"
#include "emrkit/format.hpp"
#include "emrkit/json.hpp"

namespace emrkit::bench {

// Structured cohort filters. Every field is independent; a stay must satisfy
// all active filters to enter the gold cohort.
struct RecordCountCriterion {
  std::vector<std::string> codes;
  int min_count = 1;
};

struct CohortCriteria {
  enum class GenderFilter { Any, Male, Female };

  std::optional<int> age_min;
  std::optional<int> age_max;
  GenderFilter gender = GenderFilter::Any;
  bool exclude_missing_discharge = false;
  bool exclude_missing_gender = false;
  std::optional<double> min_stay_hours;
  bool exclude_multiple_stays = false;
  // When set together with exclude_multiple_stays, the earliest stay of a
  // multi-stay patient is kept instead of dropping the patient outright.
  bool keep_first_stay = false;
  std::optional<RecordCountCriterion> min_clinical_records;

  Json to_json() const;
  static CohortCriteria from_json(const Json& j);
};

enum class GenderValue { Male, Female, Missing };
enum class MortalityValue { Dead, Alive, Unknown };

// Normalized per-stay view extracted from a fixture dataset, independent of
// the style-specific table layout.
struct StayFacts {
  std::string stay_id;
  std::string patient_key;
  std::optional<int> age;
  GenderValue gender = GenderValue::Missing;
  MortalityValue mortality = MortalityValue::Unknown;
  bool discharge_known = false;
  std::optional<double> los_hours;
  long long admit_order = 0;
  std::map<std::string, int> record_counts;
};

std::vector<StayFacts> extract_stay_facts(const Dataset& dataset, FixtureStyle style);

struct GoldCohort {
  std::vector<std::string> header;
  std::vector<std::string> stay_ids;
  std::vector<std::vector<std::string>> rows;
};

// Derives the reference answer for a request by filtering stay facts and
// rendering one cell per requested feature. Enum features render their token,
// integer features the age, float features the stay length in hours.
GoldCohort build_gold_cohort(const FixtureBundle& bundle,
                             const CohortCriteria& criteria,
                             const FeatureFormatSpec& format_spec);

bool stay_passes(const StayFacts& stay, const CohortCriteria& criteria,
                 const std::map<std::string, int>& stays_per_patient,
                 const std::map<std::string, std::string>& first_stay_of_patient);

std::string render_stay_cell(const StayFacts& stay, const FeatureFormat& format);

}  // namespace emrkit::bench
