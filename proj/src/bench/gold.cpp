#include "emrkit/bench/gold.hpp"

#include <algorithm>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::bench {

namespace {

using Cell = std::optional<std::string>;
using Row = std::vector<Cell>;

int col_index(const TableData& t, const std::string& name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name) return static_cast<int>(i);
    throw internal_error("table " + t.name + " has no column " + name);
}

const TableData& need_table(const Dataset& d, const std::string& name) {
    const TableData* t = d.find(name);
    if (!t) throw internal_error("dataset has no table " + name);
    return *t;
}

long long cell_ll(const Cell& c) {
    auto v = util::parse_int(c.value());
    if (!v) throw internal_error("expected integer cell, got " + c.value_or("NULL"));
    return *v;
}

std::vector<StayFacts> extract_mimic(const Dataset& d) {
    const TableData& patients = need_table(d, "patients");
    const TableData& admissions = need_table(d, "admissions");
    const TableData& icustays = need_table(d, "icustays");
    const TableData& chartevents = need_table(d, "chartevents");
    const TableData& labevents = need_table(d, "labevents");

    std::map<std::string, Cell> gender_by_subject;
    {
        int c_subject = col_index(patients, "subject_id");
        int c_gender = col_index(patients, "gender_code");
        for (const Row& r : patients.rows) gender_by_subject[r[c_subject].value()] = r[c_gender];
    }
    std::map<std::string, std::pair<std::string, Cell>> adm_by_hadm;
    {
        int c_hadm = col_index(admissions, "hadm_id");
        int c_age = col_index(admissions, "admission_age");
        int c_expire = col_index(admissions, "hospital_expire_flag");
        for (const Row& r : admissions.rows)
            adm_by_hadm[r[c_hadm].value()] = {r[c_age].value(), r[c_expire]};
    }
    std::map<std::string, std::map<std::string, int>> counts_by_stay;
    for (const TableData* events : {&chartevents, &labevents}) {
        int c_stay = col_index(*events, "icustay_id");
        int c_item = col_index(*events, "itemid");
        for (const Row& r : events->rows) ++counts_by_stay[r[c_stay].value()][r[c_item].value()];
    }

    std::vector<StayFacts> out;
    int c_stay = col_index(icustays, "icustay_id");
    int c_hadm = col_index(icustays, "hadm_id");
    int c_subject = col_index(icustays, "subject_id");
    int c_in = col_index(icustays, "intime");
    int c_out = col_index(icustays, "outtime");
    for (const Row& r : icustays.rows) {
        StayFacts f;
        f.stay_id = r[c_stay].value();
        f.patient_key = r[c_subject].value();
        const auto& adm = adm_by_hadm.at(r[c_hadm].value());
        f.age = static_cast<int>(*util::parse_int(adm.first));
        const Cell& gender = gender_by_subject.at(f.patient_key);
        if (gender.has_value() && *gender == "23")
            f.gender = GenderValue::Male;
        else if (gender.has_value() && *gender == "24")
            f.gender = GenderValue::Female;
        if (adm.second.has_value())
            f.mortality = *adm.second == "1" ? MortalityValue::Dead : MortalityValue::Alive;
        f.admit_order = cell_ll(r[c_in]);
        if (r[c_out].has_value()) {
            f.discharge_known = true;
            f.los_hours = static_cast<double>(cell_ll(r[c_out]) - cell_ll(r[c_in])) / 3600.0;
        }
        auto counts = counts_by_stay.find(f.stay_id);
        if (counts != counts_by_stay.end()) f.record_counts = counts->second;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<StayFacts> extract_eicu(const Dataset& d) {
    const TableData& patient = need_table(d, "patient");
    const TableData& vitalperiodic = need_table(d, "vitalperiodic");
    const TableData& lab = need_table(d, "lab");

    std::map<std::string, std::map<std::string, int>> counts_by_stay;
    {
        int c_stay = col_index(vitalperiodic, "patientunitstayid");
        for (const Row& r : vitalperiodic.rows)
            for (std::size_t i = 0; i < vitalperiodic.columns.size(); ++i) {
                const std::string& col = vitalperiodic.columns[i];
                if (col == "patientunitstayid" || col == "observationoffset") continue;
                if (r[i].has_value()) ++counts_by_stay[r[c_stay].value()][col];
            }
        int l_stay = col_index(lab, "patientunitstayid");
        int l_name = col_index(lab, "labname");
        for (const Row& r : lab.rows) ++counts_by_stay[r[l_stay].value()][r[l_name].value()];
    }

    std::vector<StayFacts> out;
    int c_stay = col_index(patient, "patientunitstayid");
    int c_pid = col_index(patient, "uniquepid");
    int c_visit = col_index(patient, "unitvisitnumber");
    int c_gender = col_index(patient, "gender");
    int c_age = col_index(patient, "age");
    int c_status = col_index(patient, "hospitaldischargestatus");
    int c_offset = col_index(patient, "unitdischargeoffset");
    for (const Row& r : patient.rows) {
        StayFacts f;
        f.stay_id = r[c_stay].value();
        f.patient_key = r[c_pid].value();
        const std::string& age_text = r[c_age].value();
        if (!age_text.empty()) f.age = static_cast<int>(*util::parse_int(age_text));
        const std::string& gender = r[c_gender].value();
        if (gender == "Male")
            f.gender = GenderValue::Male;
        else if (gender == "Female")
            f.gender = GenderValue::Female;
        const std::string& status = r[c_status].value();
        if (status == "Expired")
            f.mortality = MortalityValue::Dead;
        else if (status == "Alive")
            f.mortality = MortalityValue::Alive;
        f.admit_order = cell_ll(r[c_visit]);
        if (r[c_offset].has_value()) {
            f.discharge_known = true;
            f.los_hours = static_cast<double>(cell_ll(r[c_offset])) / 60.0;
        }
        auto counts = counts_by_stay.find(f.stay_id);
        if (counts != counts_by_stay.end()) f.record_counts = counts->second;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<StayFacts> extract_sic(const Dataset& d) {
    const TableData& cases = need_table(d, "cases");
    const TableData& signals = need_table(d, "signals");

    std::map<std::string, std::map<std::string, int>> counts_by_stay;
    {
        int c_case = col_index(signals, "case_id");
        int c_ref = col_index(signals, "reference_id");
        for (const Row& r : signals.rows) ++counts_by_stay[r[c_case].value()][r[c_ref].value()];
    }

    std::vector<StayFacts> out;
    int c_case = col_index(cases, "case_id");
    int c_patient = col_index(cases, "patient_id");
    int c_age = col_index(cases, "admission_age");
    int c_sex = col_index(cases, "sex_reference");
    int c_admit = col_index(cases, "icu_admission_time");
    int c_discharge = col_index(cases, "icu_discharge_time");
    int c_state = col_index(cases, "discharge_state_reference");
    for (const Row& r : cases.rows) {
        StayFacts f;
        f.stay_id = r[c_case].value();
        f.patient_key = r[c_patient].value();
        f.age = static_cast<int>(*util::parse_int(r[c_age].value()));
        if (r[c_sex].has_value()) {
            if (*r[c_sex] == "735")
                f.gender = GenderValue::Male;
            else if (*r[c_sex] == "736")
                f.gender = GenderValue::Female;
        }
        if (r[c_state].has_value()) {
            if (*r[c_state] == "737")
                f.mortality = MortalityValue::Dead;
            else if (*r[c_state] == "738")
                f.mortality = MortalityValue::Alive;
        }
        f.admit_order = cell_ll(r[c_admit]);
        if (r[c_discharge].has_value()) {
            f.discharge_known = true;
            f.los_hours =
                static_cast<double>(cell_ll(r[c_discharge]) - cell_ll(r[c_admit])) / 3600.0;
        }
        auto counts = counts_by_stay.find(f.stay_id);
        if (counts != counts_by_stay.end()) f.record_counts = counts->second;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace

Json CohortCriteria::to_json() const {
    Json j = Json::object();
    if (age_min) j["age_min"] = *age_min;
    if (age_max) j["age_max"] = *age_max;
    switch (gender) {
        case GenderFilter::Any: j["gender"] = "any"; break;
        case GenderFilter::Male: j["gender"] = "male"; break;
        case GenderFilter::Female: j["gender"] = "female"; break;
    }
    j["exclude_missing_discharge"] = exclude_missing_discharge;
    j["exclude_missing_gender"] = exclude_missing_gender;
    if (min_stay_hours) j["min_stay_hours"] = *min_stay_hours;
    j["exclude_multiple_stays"] = exclude_multiple_stays;
    j["keep_first_stay"] = keep_first_stay;
    if (min_clinical_records) {
        Json rc = Json::object();
        rc["codes"] = min_clinical_records->codes;
        rc["min_count"] = min_clinical_records->min_count;
        j["min_clinical_records"] = std::move(rc);
    }
    return j;
}

CohortCriteria CohortCriteria::from_json(const Json& j) {
    CohortCriteria c;
    if (j.contains("age_min")) c.age_min = j.at("age_min").get<int>();
    if (j.contains("age_max")) c.age_max = j.at("age_max").get<int>();
    if (j.contains("gender")) {
        std::string g = util::lower(j.at("gender").get<std::string>());
        if (g == "male")
            c.gender = GenderFilter::Male;
        else if (g == "female")
            c.gender = GenderFilter::Female;
        else if (g == "any")
            c.gender = GenderFilter::Any;
        else
            throw config_error("unknown gender filter: " + g);
    }
    if (j.contains("exclude_missing_discharge"))
        c.exclude_missing_discharge = j.at("exclude_missing_discharge").get<bool>();
    if (j.contains("exclude_missing_gender"))
        c.exclude_missing_gender = j.at("exclude_missing_gender").get<bool>();
    if (j.contains("min_stay_hours")) c.min_stay_hours = j.at("min_stay_hours").get<double>();
    if (j.contains("exclude_multiple_stays"))
        c.exclude_multiple_stays = j.at("exclude_multiple_stays").get<bool>();
    if (j.contains("keep_first_stay")) c.keep_first_stay = j.at("keep_first_stay").get<bool>();
    if (j.contains("min_clinical_records")) {
        const Json& rc = j.at("min_clinical_records");
        RecordCountCriterion r;
        r.codes = rc.at("codes").get<std::vector<std::string>>();
        r.min_count = rc.at("min_count").get<int>();
        c.min_clinical_records = std::move(r);
    }
    return c;
}

std::vector<StayFacts> extract_stay_facts(const Dataset& dataset, FixtureStyle style) {
    switch (style) {
        case FixtureStyle::MimicLike: return extract_mimic(dataset);
        case FixtureStyle::EicuLike: return extract_eicu(dataset);
        case FixtureStyle::SicLike: return extract_sic(dataset);
    }
    throw internal_error("unhandled fixture style");
}

bool stay_passes(const StayFacts& stay, const CohortCriteria& criteria,
                 const std::map<std::string, int>& stays_per_patient,
                 const std::map<std::string, std::string>& first_stay_of_patient) {
    if (criteria.age_min || criteria.age_max) {
        if (!stay.age) return false;
        if (criteria.age_min && *stay.age < *criteria.age_min) return false;
        if (criteria.age_max && *stay.age > *criteria.age_max) return false;
    }
    if (criteria.gender == CohortCriteria::GenderFilter::Male && stay.gender != GenderValue::Male)
        return false;
    if (criteria.gender == CohortCriteria::GenderFilter::Female &&
        stay.gender != GenderValue::Female)
        return false;
    if (criteria.exclude_missing_gender && stay.gender == GenderValue::Missing) return false;
    if (criteria.exclude_missing_discharge && !stay.discharge_known) return false;
    if (criteria.min_stay_hours) {
        if (!stay.los_hours) return false;
        if (*stay.los_hours < *criteria.min_stay_hours) return false;
    }
    if (criteria.exclude_multiple_stays) {
        auto it = stays_per_patient.find(stay.patient_key);
        int n = it == stays_per_patient.end() ? 1 : it->second;
        if (n > 1) {
            if (!criteria.keep_first_stay) return false;
            auto first = first_stay_of_patient.find(stay.patient_key);
            if (first == first_stay_of_patient.end() || first->second != stay.stay_id)
                return false;
        }
    }
    if (criteria.min_clinical_records) {
        int total = 0;
        for (const std::string& code : criteria.min_clinical_records->codes) {
            auto it = stay.record_counts.find(code);
            if (it != stay.record_counts.end()) total += it->second;
        }
        if (total < criteria.min_clinical_records->min_count) return false;
    }
    return true;
}

std::string render_stay_cell(const StayFacts& stay, const FeatureFormat& format) {
    switch (format.kind) {
        case ValueKind::Identifier:
            return stay.stay_id;
        case ValueKind::GenderEnum:
            switch (stay.gender) {
                case GenderValue::Male: return "Male";
                case GenderValue::Female: return "Female";
                case GenderValue::Missing: return "Unknown";
            }
            return "Unknown";
        case ValueKind::MortalityEnum:
            switch (stay.mortality) {
                case MortalityValue::Dead: return "Dead";
                case MortalityValue::Alive: return "Alive";
                case MortalityValue::Unknown: return "Unknown";
            }
            return "Unknown";
        case ValueKind::Integer:
            return stay.age ? std::to_string(*stay.age) : "NULL";
        case ValueKind::FloatRounded:
            return stay.los_hours ? util::format_decimal(*stay.los_hours, format.decimals)
                                  : "NULL";
    }
    return "NULL";
}

GoldCohort build_gold_cohort(const FixtureBundle& bundle, const CohortCriteria& criteria,
                             const FeatureFormatSpec& format_spec) {
    std::vector<StayFacts> facts = extract_stay_facts(bundle.dataset, bundle.spec.style);

    std::map<std::string, int> stays_per_patient;
    std::map<std::string, std::pair<long long, std::string>> earliest;
    for (const StayFacts& f : facts) {
        ++stays_per_patient[f.patient_key];
        auto it = earliest.find(f.patient_key);
        if (it == earliest.end() || f.admit_order < it->second.first)
            earliest[f.patient_key] = {f.admit_order, f.stay_id};
    }
    std::map<std::string, std::string> first_stay;
    for (const auto& [patient, entry] : earliest) first_stay[patient] = entry.second;

    std::vector<const StayFacts*> selected;
    for (const StayFacts& f : facts)
        if (stay_passes(f, criteria, stays_per_patient, first_stay)) selected.push_back(&f);
    std::sort(selected.begin(), selected.end(), [](const StayFacts* a, const StayFacts* b) {
        auto ia = util::parse_int(a->stay_id);
        auto ib = util::parse_int(b->stay_id);
        if (ia && ib) return *ia < *ib;
        return a->stay_id < b->stay_id;
    });

    GoldCohort gold;
    for (const FeatureFormat& f : format_spec.features) gold.header.push_back(f.feature_name);
    for (const StayFacts* f : selected) {
        gold.stay_ids.push_back(f->stay_id);
        std::vector<std::string> row;
        for (const FeatureFormat& fmt : format_spec.features)
            row.push_back(render_stay_cell(*f, fmt));
        gold.rows.push_back(std::move(row));
    }
    return gold;
}

}  // namespace emrkit::bench
