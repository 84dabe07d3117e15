#include "emrkit/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::bench {

namespace {

std::size_t identifier_column(const FeatureFormatSpec& spec) {
    for (std::size_t i = 0; i < spec.features.size(); ++i)
        if (spec.features[i].kind == ValueKind::Identifier) return i;
    return 0;
}

bool cells_agree(const FeatureFormat& format, const std::string& predicted,
                 const std::string& gold) {
    auto p = format.canonical(util::trim(predicted));
    auto g = format.canonical(util::trim(gold));
    if (p.has_value() != g.has_value()) return false;
    if (!p.has_value()) return util::trim(predicted) == util::trim(gold);
    return *p == *g;
}

// Typed canonical item keys keep the three universes disjoint even when a
// code string happens to equal a lab name.
std::string code_key(const std::string& code, const std::string& name) {
    return "c:" + util::trim(code) + "\x1f" + util::lower(util::trim(name));
}

std::string name_key(const std::string& name) { return "n:" + util::lower(util::trim(name)); }

std::string column_key(const std::string& ref) {
    std::string r = util::lower(util::trim(ref));
    // Normalize db.table.column to table.column.
    std::vector<std::string> parts = util::split(r, '.');
    if (parts.size() == 3) r = parts[1] + "." + parts[2];
    return "k:" + r;
}

std::set<std::string> item_keys(const MappingItem& item) {
    std::set<std::string> keys;
    for (const auto& [code, name] : item.codes) keys.insert(code_key(code, name));
    for (const std::string& name : item.names) keys.insert(name_key(name));
    for (const std::string& ref : item.column_refs) keys.insert(column_key(ref));
    return keys;
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

Json CohortEvaluation::to_json() const {
    Json j = Json::object();
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["format_accuracy"] = format_accuracy;
    j["predicted_unique"] = predicted_unique;
    j["gold_size"] = gold_size;
    j["intersection"] = intersection;
    j["had_duplicate_ids"] = had_duplicate_ids;
    j["empty_prediction"] = empty_prediction;
    return j;
}

CohortEvaluation evaluate_cohort(const std::vector<std::vector<std::string>>& predicted_rows,
                                 const GoldCohort& gold, const FeatureFormatSpec& format_spec) {
    CohortEvaluation eval;
    std::size_t id_col = identifier_column(format_spec);

    std::map<std::string, const std::vector<std::string>*> predicted_by_id;
    for (const auto& row : predicted_rows) {
        if (row.size() <= id_col) continue;
        std::string id = util::trim(row[id_col]);
        auto [it, inserted] = predicted_by_id.emplace(id, &row);
        if (!inserted) eval.had_duplicate_ids = true;
    }
    eval.predicted_unique = predicted_by_id.size();
    eval.gold_size = gold.stay_ids.size();
    eval.empty_prediction = predicted_by_id.empty();

    std::size_t correct_format = 0;
    for (std::size_t i = 0; i < gold.stay_ids.size(); ++i) {
        auto it = predicted_by_id.find(util::trim(gold.stay_ids[i]));
        if (it == predicted_by_id.end()) continue;
        ++eval.intersection;
        const std::vector<std::string>& prow = *it->second;
        const std::vector<std::string>& grow = gold.rows[i];
        if (prow.size() != format_spec.features.size()) continue;
        bool all_agree = true;
        for (std::size_t c = 0; c < format_spec.features.size() && all_agree; ++c)
            all_agree = cells_agree(format_spec.features[c], prow[c], grow[c]);
        if (all_agree) ++correct_format;
    }

    eval.precision = safe_div(static_cast<double>(eval.intersection),
                              static_cast<double>(eval.predicted_unique));
    eval.recall =
        safe_div(static_cast<double>(eval.intersection), static_cast<double>(eval.gold_size));
    eval.f1 = safe_div(2.0 * eval.precision * eval.recall, eval.precision + eval.recall);
    eval.format_accuracy =
        safe_div(static_cast<double>(correct_format), static_cast<double>(eval.intersection));
    return eval;
}

Json FormatValidation::to_json() const {
    Json j = Json::object();
    j["all_pass"] = all_pass;
    j["column_count_expected"] = column_count_expected;
    j["column_count_actual"] = column_count_actual;
    Json cols = Json::array();
    for (const ColumnFormatReport& c : columns) {
        Json jc = Json::object();
        jc["feature_name"] = c.feature_name;
        jc["checked"] = c.checked;
        jc["failed"] = c.failed;
        jc["first_offending_value"] = c.first_offending_value;
        cols.push_back(std::move(jc));
    }
    j["columns"] = std::move(cols);
    return j;
}

FormatValidation validate_feature_formats(const std::vector<std::vector<std::string>>& rows,
                                          const FeatureFormatSpec& format_spec) {
    FormatValidation v;
    v.column_count_expected = format_spec.features.size();
    v.column_count_actual = rows.empty() ? 0 : rows.front().size();
    for (const FeatureFormat& f : format_spec.features) {
        ColumnFormatReport report;
        report.feature_name = f.feature_name;
        v.columns.push_back(std::move(report));
    }
    for (const auto& row : rows) {
        if (row.size() != format_spec.features.size()) {
            v.all_pass = false;
            continue;
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            ColumnFormatReport& report = v.columns[c];
            ++report.checked;
            if (!format_spec.features[c].value_matches(util::trim(row[c]))) {
                if (report.failed == 0) report.first_offending_value = row[c];
                ++report.failed;
                v.all_pass = false;
            }
        }
    }
    return v;
}

Json MappingEvaluation::to_json() const {
    Json j = Json::object();
    j["micro_f1"] = micro_f1;
    j["macro_f1"] = macro_f1;
    j["precision"] = precision;
    j["recall"] = recall;
    j["specificity"] = specificity;
    j["balanced_accuracy"] = balanced_accuracy;
    j["true_positives"] = true_positives;
    j["false_positives"] = false_positives;
    j["false_negatives"] = false_negatives;
    j["true_negatives"] = true_negatives;
    j["out_of_universe"] = out_of_universe;
    return j;
}

MappingEvaluation evaluate_mapping(const std::map<std::string, MappingItem>& predicted,
                                   const MappingGold& gold) {
    MappingEvaluation eval;

    std::set<std::string> universe;
    for (const auto& [code, name] : gold.code_universe) universe.insert(code_key(code, name));
    for (const std::string& name : gold.name_universe) universe.insert(name_key(name));
    for (const std::string& ref : gold.column_universe) universe.insert(column_key(ref));

    double macro_sum = 0.0;
    std::size_t macro_n = 0;

    for (const auto& [feature, gold_item] : gold.features) {
        std::set<std::string> gold_keys = item_keys(gold_item);
        std::set<std::string> pred_keys;
        auto it = predicted.find(feature);
        if (it != predicted.end()) pred_keys = item_keys(it->second);

        std::size_t tp = 0;
        for (const std::string& k : pred_keys)
            if (gold_keys.count(k)) ++tp;
        std::size_t fn = gold_keys.size() - tp;

        eval.true_positives += tp;
        eval.false_negatives += fn;
        for (const std::string& k : pred_keys) {
            if (gold_keys.count(k)) continue;
            ++eval.false_positives;
            if (!universe.count(k)) eval.out_of_universe.push_back(feature + ": " + k);
        }

        std::size_t negatives = 0;
        std::size_t hit_negatives = 0;
        for (const std::string& k : universe) {
            if (gold_keys.count(k)) continue;
            ++negatives;
            if (pred_keys.count(k)) ++hit_negatives;
        }
        eval.true_negatives += negatives - hit_negatives;

        if (gold_item.outcome == MappingItem::Outcome::Absent) {
            // The presence decision itself: an absent feature predicted empty
            // is one true negative, predicted non-empty one false positive.
            if (pred_keys.empty())
                ++eval.true_negatives;
            else
                ++eval.false_positives;
            macro_sum += pred_keys.empty() ? 1.0 : 0.0;
        } else {
            macro_sum += safe_div(2.0 * static_cast<double>(tp),
                                  static_cast<double>(pred_keys.size() + gold_keys.size()));
        }
        ++macro_n;
    }

    for (const auto& [feature, item] : predicted) {
        if (gold.features.count(feature)) continue;
        for (const std::string& k : item_keys(item)) {
            ++eval.false_positives;
            if (!universe.count(k)) eval.out_of_universe.push_back(feature + ": " + k);
        }
    }

    double tp = static_cast<double>(eval.true_positives);
    double fp = static_cast<double>(eval.false_positives);
    double fn = static_cast<double>(eval.false_negatives);
    double tn = static_cast<double>(eval.true_negatives);
    eval.precision = safe_div(tp, tp + fp);
    eval.recall = safe_div(tp, tp + fn);
    eval.micro_f1 = safe_div(2.0 * tp, 2.0 * tp + fp + fn);
    eval.specificity = safe_div(tn, tn + fp);
    eval.balanced_accuracy = (eval.recall + eval.specificity) / 2.0;
    eval.macro_f1 = macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n);
    return eval;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    double sample_var = ss / static_cast<double>(xs.size() - 1);
    return std::sqrt(sample_var / static_cast<double>(xs.size()));
}

Json TrialStats::to_json() const {
    Json j = Json::object();
    j["scores"] = scores;
    j["mean"] = mean;
    j["stderr"] = stderr_of_mean;
    j["failures"] = failures;
    return j;
}

TrialStats run_trials(int trials, const std::function<std::optional<double>(int)>& runner) {
    if (trials < 1) throw config_error("trial count must be positive, got " + std::to_string(trials));
    TrialStats stats;
    for (int i = 0; i < trials; ++i) {
        std::optional<double> score = runner(i);
        if (!score) {
            ++stats.failures;
            stats.scores.push_back(0.0);
        } else {
            stats.scores.push_back(*score);
        }
    }
    stats.mean = mean_of(stats.scores);
    stats.stderr_of_mean = stderr_of(stats.scores);
    return stats;
}

}  // namespace emrkit::bench
