#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../support/testutil.hpp"
#include "emrkit/bench/fixture.hpp"
#include "emrkit/bench/gold.hpp"
#include "emrkit/db/gateway.hpp"
#include "emrkit/error.hpp"
#include "emrkit/format.hpp"
#include "emrkit/json.hpp"
#include "emrkit/util.hpp"

using emrkit::Error;
using emrkit::ErrorKind;
using emrkit::FeatureFormat;
using emrkit::FeatureFormatSpec;
using emrkit::Json;
using emrkit::ValueKind;
namespace bench = emrkit::bench;
namespace db = emrkit::db;
namespace util = emrkit::util;

namespace {

const bench::FixtureStyle kStyles[] = {
    bench::FixtureStyle::MimicLike,
    bench::FixtureStyle::EicuLike,
    bench::FixtureStyle::SicLike,
};

bench::StayFacts make_stay(const std::string& stay_id, const std::string& patient_key) {
    bench::StayFacts f;
    f.stay_id = stay_id;
    f.patient_key = patient_key;
    f.age = 40;
    f.gender = bench::GenderValue::Male;
    f.mortality = bench::MortalityValue::Alive;
    f.discharge_known = true;
    f.los_hours = 48.0;
    f.admit_order = 1;
    return f;
}

bool passes_alone(const bench::StayFacts& stay, const bench::CohortCriteria& criteria) {
    std::map<std::string, int> one_stay{{stay.patient_key, 1}};
    std::map<std::string, std::string> first{{stay.patient_key, stay.stay_id}};
    return bench::stay_passes(stay, criteria, one_stay, first);
}

// Second filtering implementation, organized as successive elimination passes
// over patient groups rather than a per-stay predicate.
std::set<std::string> ref_select(const std::vector<bench::StayFacts>& stays,
                                 const bench::CohortCriteria& c) {
    std::map<std::string, std::vector<const bench::StayFacts*>> by_patient;
    for (const auto& s : stays) by_patient[s.patient_key].push_back(&s);

    std::set<std::string> keep;
    for (const auto& s : stays) {
        bool ok = true;
        if ((c.age_min || c.age_max) && !s.age) ok = false;
        if (ok && c.age_min && *s.age < *c.age_min) ok = false;
        if (ok && c.age_max && *s.age > *c.age_max) ok = false;
        if (ok) keep.insert(s.stay_id);
    }

    auto eliminate = [&](const std::function<bool(const bench::StayFacts&)>& stays_in) {
        for (const auto& s : stays) {
            if (keep.count(s.stay_id) && !stays_in(s)) keep.erase(s.stay_id);
        }
    };

    if (c.gender == bench::CohortCriteria::GenderFilter::Male) {
        eliminate([](const bench::StayFacts& s) { return s.gender == bench::GenderValue::Male; });
    }
    if (c.gender == bench::CohortCriteria::GenderFilter::Female) {
        eliminate([](const bench::StayFacts& s) { return s.gender == bench::GenderValue::Female; });
    }
    if (c.exclude_missing_gender) {
        eliminate([](const bench::StayFacts& s) { return s.gender != bench::GenderValue::Missing; });
    }
    if (c.exclude_missing_discharge) {
        eliminate([](const bench::StayFacts& s) { return s.discharge_known; });
    }
    if (c.min_stay_hours) {
        eliminate([&](const bench::StayFacts& s) {
            return s.los_hours.has_value() && *s.los_hours >= *c.min_stay_hours;
        });
    }
    if (c.exclude_multiple_stays) {
        for (const auto& [patient, group] : by_patient) {
            if (group.size() <= 1) continue;
            const bench::StayFacts* first = group[0];
            for (const bench::StayFacts* s : group) {
                if (s->admit_order < first->admit_order) first = s;
            }
            for (const bench::StayFacts* s : group) {
                if (!c.keep_first_stay || s != first) keep.erase(s->stay_id);
            }
        }
    }
    if (c.min_clinical_records) {
        eliminate([&](const bench::StayFacts& s) {
            int total = 0;
            for (const std::string& code : c.min_clinical_records->codes) {
                auto it = s.record_counts.find(code);
                if (it != s.record_counts.end()) total += it->second;
            }
            return total >= c.min_clinical_records->min_count;
        });
    }
    return keep;
}

std::vector<std::string> code_pool(bench::FixtureStyle style) {
    switch (style) {
        case bench::FixtureStyle::MimicLike: return {"211", "618", "50803", "50809"};
        case bench::FixtureStyle::EicuLike:
            return {"heartrate", "respiratoryrate", "bicarbonate", "glucose"};
        case bench::FixtureStyle::SicLike: return {"708", "658", "656", "657"};
    }
    return {};
}

bench::CohortCriteria random_criteria(util::Rng& rng, bench::FixtureStyle style) {
    bench::CohortCriteria c;
    if (rng.chance(0.55)) {
        c.age_min = static_cast<int>(rng.range(15, 70));
        if (rng.chance(0.8)) c.age_max = *c.age_min + static_cast<int>(rng.range(0, 30));
    } else if (rng.chance(0.3)) {
        c.age_max = static_cast<int>(rng.range(20, 90));
    }
    long long g = rng.range(0, 2);
    if (g == 1) c.gender = bench::CohortCriteria::GenderFilter::Male;
    if (g == 2) c.gender = bench::CohortCriteria::GenderFilter::Female;
    c.exclude_missing_discharge = rng.chance(0.35);
    c.exclude_missing_gender = rng.chance(0.3);
    if (rng.chance(0.4)) c.min_stay_hours = 6.0 * static_cast<double>(rng.range(1, 30));
    c.exclude_multiple_stays = rng.chance(0.4);
    c.keep_first_stay = c.exclude_multiple_stays && rng.chance(0.5);
    if (rng.chance(0.35)) {
        bench::RecordCountCriterion rc;
        std::vector<std::string> pool = code_pool(style);
        rc.codes.push_back(pool[static_cast<std::size_t>(rng.range(0, 3))]);
        std::string second = pool[static_cast<std::size_t>(rng.range(0, 3))];
        if (rng.chance(0.3) && second != rc.codes[0]) rc.codes.push_back(second);
        rc.min_count = static_cast<int>(rng.range(1, 20));
        c.min_clinical_records = rc;
    }
    return c;
}

FeatureFormatSpec los_spec() {
    return FeatureFormatSpec::from_feature_text(
        "ICU stay id, gender (Male or Female or Unknown), age (integer), "
        "length of ICU stay in hours (a float number rounded to 4 decimal places)");
}

std::optional<long long> sql_ll(const std::string& rendered) {
    if (rendered == "NULL") return std::nullopt;
    return util::parse_int(rendered);
}

// Re-derives stay facts through the SQL gateway over a provisioned database,
// exercising a completely different route than the in-memory extraction.
std::map<std::string, bench::StayFacts> sql_extract(const bench::FixtureBundle& bundle,
                                                    const std::string& db_path) {
    bundle.provision(db_path, true);
    db::Session session = db::connect("sqlite:" + db_path);
    std::map<std::string, bench::StayFacts> out;

    auto rows_of = [&](const std::string& sql) {
        db::QueryOutcome outcome = db::execute_final_all(session, sql);
        REQUIRE(outcome.ok());
        return outcome.result->rows;
    };

    switch (bundle.spec.style) {
        case bench::FixtureStyle::MimicLike: {
            for (const auto& r : rows_of(
                     "SELECT i.icustay_id, i.subject_id, a.admission_age, p.gender_code, "
                     "a.hospital_expire_flag, i.intime, i.outtime "
                     "FROM icustays i "
                     "JOIN admissions a ON a.hadm_id = i.hadm_id "
                     "JOIN patients p ON p.subject_id = i.subject_id")) {
                bench::StayFacts f;
                f.stay_id = r[0];
                f.patient_key = r[1];
                f.age = static_cast<int>(*util::parse_int(r[2]));
                if (r[3] == "23") f.gender = bench::GenderValue::Male;
                if (r[3] == "24") f.gender = bench::GenderValue::Female;
                if (r[4] != "NULL") {
                    f.mortality =
                        r[4] == "1" ? bench::MortalityValue::Dead : bench::MortalityValue::Alive;
                }
                f.admit_order = *sql_ll(r[5]);
                auto outtime = sql_ll(r[6]);
                if (outtime) {
                    f.discharge_known = true;
                    f.los_hours = static_cast<double>(*outtime - f.admit_order) / 3600.0;
                }
                out[f.stay_id] = std::move(f);
            }
            for (const char* table : {"chartevents", "labevents"}) {
                for (const auto& r :
                     rows_of(std::string("SELECT icustay_id, itemid, COUNT(*) FROM ") + table +
                             " GROUP BY icustay_id, itemid")) {
                    out.at(r[0]).record_counts[r[1]] += static_cast<int>(*util::parse_int(r[2]));
                }
            }
            break;
        }
        case bench::FixtureStyle::EicuLike: {
            for (const auto& r : rows_of(
                     "SELECT patientunitstayid, uniquepid, unitvisitnumber, gender, age, "
                     "hospitaldischargestatus, unitdischargeoffset FROM patient")) {
                bench::StayFacts f;
                f.stay_id = r[0];
                f.patient_key = r[1];
                f.admit_order = *util::parse_int(r[2]);
                if (r[3] == "Male") f.gender = bench::GenderValue::Male;
                if (r[3] == "Female") f.gender = bench::GenderValue::Female;
                if (!r[4].empty()) f.age = static_cast<int>(*util::parse_int(r[4]));
                if (r[5] == "Expired") f.mortality = bench::MortalityValue::Dead;
                if (r[5] == "Alive") f.mortality = bench::MortalityValue::Alive;
                auto offset = sql_ll(r[6]);
                if (offset) {
                    f.discharge_known = true;
                    f.los_hours = static_cast<double>(*offset) / 60.0;
                }
                out[f.stay_id] = std::move(f);
            }
            std::string vital_sql = "SELECT patientunitstayid";
            std::vector<std::string> vital_cols = {
                "heartrate",        "respiratoryrate",   "sao2",        "temperature",
                "systemicsystolic", "systemicdiastolic", "systemicmean"};
            for (const std::string& col : vital_cols) vital_sql += ", COUNT(" + col + ")";
            vital_sql += " FROM vitalperiodic GROUP BY patientunitstayid";
            for (const auto& r : rows_of(vital_sql)) {
                for (std::size_t i = 0; i < vital_cols.size(); i++) {
                    int n = static_cast<int>(*util::parse_int(r[i + 1]));
                    if (n > 0) out.at(r[0]).record_counts[vital_cols[i]] = n;
                }
            }
            for (const auto& r : rows_of(
                     "SELECT patientunitstayid, labname, COUNT(*) FROM lab GROUP BY 1, 2")) {
                out.at(r[0]).record_counts[r[1]] = static_cast<int>(*util::parse_int(r[2]));
            }
            break;
        }
        case bench::FixtureStyle::SicLike: {
            for (const auto& r : rows_of(
                     "SELECT case_id, patient_id, admission_age, sex_reference, "
                     "icu_admission_time, icu_discharge_time, discharge_state_reference "
                     "FROM cases")) {
                bench::StayFacts f;
                f.stay_id = r[0];
                f.patient_key = r[1];
                f.age = static_cast<int>(*util::parse_int(r[2]));
                if (r[3] == "735") f.gender = bench::GenderValue::Male;
                if (r[3] == "736") f.gender = bench::GenderValue::Female;
                f.admit_order = *util::parse_int(r[4]);
                auto discharge = sql_ll(r[5]);
                if (discharge) {
                    f.discharge_known = true;
                    f.los_hours = static_cast<double>(*discharge - f.admit_order) / 3600.0;
                }
                if (r[6] == "737") f.mortality = bench::MortalityValue::Dead;
                if (r[6] == "738") f.mortality = bench::MortalityValue::Alive;
                out[f.stay_id] = std::move(f);
            }
            for (const auto& r : rows_of(
                     "SELECT case_id, reference_id, COUNT(*) FROM signals GROUP BY 1, 2")) {
                out.at(r[0]).record_counts[r[1]] = static_cast<int>(*util::parse_int(r[2]));
            }
            break;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("single-stay filters") {
    bench::CohortCriteria none;
    CHECK(passes_alone(make_stay("1", "p"), none));

    SUBCASE("age bounds are inclusive and demand a value") {
        bench::CohortCriteria c;
        c.age_min = 19;
        c.age_max = 29;
        bench::StayFacts s = make_stay("1", "p");
        s.age = 19;
        CHECK(passes_alone(s, c));
        s.age = 29;
        CHECK(passes_alone(s, c));
        s.age = 18;
        CHECK_FALSE(passes_alone(s, c));
        s.age = 30;
        CHECK_FALSE(passes_alone(s, c));
        s.age.reset();
        CHECK_FALSE(passes_alone(s, c));
        CHECK(passes_alone(s, none));
    }
    SUBCASE("gender filters") {
        bench::CohortCriteria c;
        c.gender = bench::CohortCriteria::GenderFilter::Female;
        bench::StayFacts s = make_stay("1", "p");
        CHECK_FALSE(passes_alone(s, c));
        s.gender = bench::GenderValue::Female;
        CHECK(passes_alone(s, c));
        s.gender = bench::GenderValue::Missing;
        CHECK_FALSE(passes_alone(s, c));

        bench::CohortCriteria require_known;
        require_known.exclude_missing_gender = true;
        CHECK_FALSE(passes_alone(s, require_known));
        CHECK(passes_alone(s, none));
        s.gender = bench::GenderValue::Male;
        CHECK(passes_alone(s, require_known));
    }
    SUBCASE("discharge and duration") {
        bench::CohortCriteria c;
        c.min_stay_hours = 30.0;
        bench::StayFacts s = make_stay("1", "p");
        s.los_hours = 30.0;
        CHECK(passes_alone(s, c));
        s.los_hours = 29.99;
        CHECK_FALSE(passes_alone(s, c));
        s.los_hours.reset();
        s.discharge_known = false;
        CHECK_FALSE(passes_alone(s, c));

        bench::CohortCriteria d;
        d.exclude_missing_discharge = true;
        CHECK_FALSE(passes_alone(s, d));
        s.discharge_known = true;
        CHECK(passes_alone(s, d));
    }
    SUBCASE("record counts sum over the listed codes") {
        bench::CohortCriteria c;
        bench::RecordCountCriterion rc;
        rc.codes = {"656", "348"};
        rc.min_count = 15;
        c.min_clinical_records = rc;

        bench::StayFacts s = make_stay("1", "p");
        s.record_counts = {{"656", 7}, {"348", 8}};
        CHECK(passes_alone(s, c));
        s.record_counts = {{"656", 7}, {"348", 7}};
        CHECK_FALSE(passes_alone(s, c));
        s.record_counts = {{"656", 15}, {"999", 50}};
        CHECK(passes_alone(s, c));
        s.record_counts.clear();
        CHECK_FALSE(passes_alone(s, c));
    }
}

TEST_CASE("multi-stay handling") {
    bench::StayFacts a = make_stay("10", "p");
    a.admit_order = 100;
    bench::StayFacts b = make_stay("11", "p");
    b.admit_order = 200;
    std::map<std::string, int> two{{"p", 2}};
    std::map<std::string, std::string> first{{"p", "10"}};

    bench::CohortCriteria drop_all;
    drop_all.exclude_multiple_stays = true;
    CHECK_FALSE(bench::stay_passes(a, drop_all, two, first));
    CHECK_FALSE(bench::stay_passes(b, drop_all, two, first));

    bench::CohortCriteria keep_first = drop_all;
    keep_first.keep_first_stay = true;
    CHECK(bench::stay_passes(a, keep_first, two, first));
    CHECK_FALSE(bench::stay_passes(b, keep_first, two, first));

    std::map<std::string, int> one{{"p", 1}};
    CHECK(bench::stay_passes(a, drop_all, one, first));
}

TEST_CASE("cell rendering") {
    bench::StayFacts s = make_stay("200123", "p");
    s.age = 63;
    s.los_hours = 30.0;
    s.mortality = bench::MortalityValue::Unknown;

    FeatureFormat id{"ICU stay id", ValueKind::Identifier, 0};
    FeatureFormat gender{"gender", ValueKind::GenderEnum, 0};
    FeatureFormat mortality{"mortality status", ValueKind::MortalityEnum, 0};
    FeatureFormat age{"age", ValueKind::Integer, 0};
    FeatureFormat los{"stay length", ValueKind::FloatRounded, 4};

    CHECK(bench::render_stay_cell(s, id) == "200123");
    CHECK(bench::render_stay_cell(s, gender) == "Male");
    CHECK(bench::render_stay_cell(s, mortality) == "Unknown");
    CHECK(bench::render_stay_cell(s, age) == "63");
    CHECK(bench::render_stay_cell(s, los) == "30.0000");

    s.gender = bench::GenderValue::Missing;
    s.mortality = bench::MortalityValue::Dead;
    s.age.reset();
    s.los_hours = 52.17;
    CHECK(bench::render_stay_cell(s, gender) == "Unknown");
    CHECK(bench::render_stay_cell(s, mortality) == "Dead");
    CHECK(bench::render_stay_cell(s, age) == "NULL");
    CHECK(bench::render_stay_cell(s, los) == "52.1700");

    s.los_hours.reset();
    CHECK(bench::render_stay_cell(s, los) == "NULL");
}

TEST_CASE("criteria JSON round trip") {
    util::Rng rng(20250816);
    for (int i = 0; i < 40; i++) {
        bench::CohortCriteria c = random_criteria(rng, bench::FixtureStyle::MimicLike);
        bench::CohortCriteria back = bench::CohortCriteria::from_json(c.to_json());
        CHECK(back.to_json().dump() == c.to_json().dump());
    }

    Json bad = Json::object();
    bad["gender"] = "expired";
    try {
        bench::CohortCriteria::from_json(bad);
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("extraction agrees with the SQL route") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);

        std::string path =
            emrkit::testing::temp_path("gold_sql_" + bench::style_name(style) + ".db");
        std::map<std::string, bench::StayFacts> via_sql = sql_extract(bundle, path);
        std::vector<bench::StayFacts> via_memory =
            bench::extract_stay_facts(bundle.dataset, style);

        REQUIRE(via_memory.size() == via_sql.size());
        for (const bench::StayFacts& m : via_memory) {
            CAPTURE(m.stay_id);
            auto it = via_sql.find(m.stay_id);
            REQUIRE(it != via_sql.end());
            const bench::StayFacts& q = it->second;
            CHECK(m.patient_key == q.patient_key);
            CHECK(m.age == q.age);
            CHECK(m.gender == q.gender);
            CHECK(m.mortality == q.mortality);
            CHECK(m.discharge_known == q.discharge_known);
            CHECK(m.los_hours == q.los_hours);
            CHECK(m.admit_order == q.admit_order);
            CHECK(m.record_counts == q.record_counts);
        }
    }
}

TEST_CASE("gold cohorts agree with an independent filter over random criteria") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
        std::vector<bench::StayFacts> facts = bench::extract_stay_facts(bundle.dataset, style);
        FeatureFormatSpec fmt = los_spec();

        util::Rng rng(0xfeedULL + static_cast<std::uint64_t>(style));
        int non_empty = 0;
        for (int i = 0; i < 100; i++) {
            bench::CohortCriteria criteria = random_criteria(rng, style);
            std::string criteria_tag = criteria.to_json().dump();
            CAPTURE(criteria_tag);
            bench::GoldCohort gold = bench::build_gold_cohort(bundle, criteria, fmt);
            std::set<std::string> produced(gold.stay_ids.begin(), gold.stay_ids.end());
            CHECK(produced == ref_select(facts, criteria));
            CHECK(produced.size() == gold.stay_ids.size());
            if (!gold.stay_ids.empty()) non_empty++;

            bool sorted = std::is_sorted(
                gold.stay_ids.begin(), gold.stay_ids.end(),
                [](const std::string& a, const std::string& b) {
                    return *util::parse_int(a) < *util::parse_int(b);
                });
            CHECK(sorted);
        }
        CHECK(non_empty >= 20);
    }
}

TEST_CASE("tightening a criterion shrinks the cohort") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
        FeatureFormatSpec fmt = los_spec();

        util::Rng rng(0xabcdULL + static_cast<std::uint64_t>(style));
        for (int i = 0; i < 30; i++) {
            bench::CohortCriteria base = random_criteria(rng, style);
            bench::CohortCriteria tighter = base;
            switch (rng.range(0, 4)) {
                case 0: tighter.exclude_missing_discharge = true; break;
                case 1: tighter.exclude_missing_gender = true; break;
                case 2: tighter.age_min = base.age_min ? *base.age_min + 5 : 30; break;
                case 3:
                    tighter.min_stay_hours = base.min_stay_hours ? *base.min_stay_hours + 10.0 : 24.0;
                    break;
                case 4:
                    if (tighter.min_clinical_records) {
                        tighter.min_clinical_records->min_count += 5;
                    } else {
                        bench::RecordCountCriterion rc;
                        rc.codes = {code_pool(style)[0]};
                        rc.min_count = 5;
                        tighter.min_clinical_records = rc;
                    }
                    break;
            }
            bench::GoldCohort wide = bench::build_gold_cohort(bundle, base, fmt);
            bench::GoldCohort narrow = bench::build_gold_cohort(bundle, tighter, fmt);
            std::set<std::string> wide_ids(wide.stay_ids.begin(), wide.stay_ids.end());
            for (const std::string& id : narrow.stay_ids) {
                CAPTURE(id);
                CHECK(wide_ids.count(id) == 1);
            }
        }
    }
}

TEST_CASE("keep-first-stay keeps exactly one stay per passing patient") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
        std::vector<bench::StayFacts> facts = bench::extract_stay_facts(bundle.dataset, style);

        bench::CohortCriteria criteria;
        criteria.exclude_multiple_stays = true;
        criteria.keep_first_stay = true;
        bench::GoldCohort gold = bench::build_gold_cohort(bundle, criteria, los_spec());

        std::set<std::string> patients;
        for (const bench::StayFacts& f : facts) patients.insert(f.patient_key);
        CHECK(gold.stay_ids.size() == patients.size());

        std::map<std::string, const bench::StayFacts*> by_stay;
        for (const bench::StayFacts& f : facts) by_stay[f.stay_id] = &f;
        std::set<std::string> seen_patients;
        for (const std::string& id : gold.stay_ids) {
            const bench::StayFacts* f = by_stay.at(id);
            CHECK(seen_patients.insert(f->patient_key).second);
            for (const bench::StayFacts& other : facts) {
                if (other.patient_key == f->patient_key && other.stay_id != f->stay_id) {
                    CHECK(other.admit_order > f->admit_order);
                }
            }
        }
    }
}

TEST_CASE("record-count boundary is inclusive end to end") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
        std::vector<bench::StayFacts> facts = bench::extract_stay_facts(bundle.dataset, style);

        const bench::CohortRequest& v3 = bundle.requests[2];
        bench::CohortCriteria at15 = bench::CohortCriteria::from_json(v3.criteria);
        REQUIRE(at15.min_clinical_records.has_value());
        REQUIRE(at15.min_clinical_records->min_count == 15);
        const std::string code = at15.min_clinical_records->codes[0];

        bench::CohortCriteria at16 = at15;
        at16.min_clinical_records->min_count = 16;

        FeatureFormatSpec fmt = los_spec();
        bench::GoldCohort wide = bench::build_gold_cohort(bundle, at15, fmt);
        bench::GoldCohort narrow = bench::build_gold_cohort(bundle, at16, fmt);
        std::set<std::string> wide_ids(wide.stay_ids.begin(), wide.stay_ids.end());
        std::set<std::string> narrow_ids(narrow.stay_ids.begin(), narrow.stay_ids.end());

        bool exercised = false;
        std::map<std::string, int> stays_per_patient;
        for (const bench::StayFacts& f : facts) ++stays_per_patient[f.patient_key];
        for (const bench::StayFacts& f : facts) {
            auto it = f.record_counts.find(code);
            int n = it == f.record_counts.end() ? 0 : it->second;
            if (n != 15) continue;
            bench::CohortCriteria demographic = at15;
            demographic.min_clinical_records.reset();
            if (!passes_alone(f, demographic)) continue;
            exercised = true;
            CHECK(wide_ids.count(f.stay_id) == 1);
            CHECK(narrow_ids.count(f.stay_id) == 0);
        }
        CHECK(exercised);
    }
}

TEST_CASE("mortality variant covers every token") {
    for (bench::FixtureStyle style : kStyles) {
        std::string style_tag = bench::style_name(style);
        CAPTURE(style_tag);
        bench::FixtureSpec spec;
        spec.style = style;
        bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
        const bench::CohortRequest& v2 = bundle.requests[1];
        FeatureFormatSpec fmt = FeatureFormatSpec::from_feature_text(v2.feature_text);
        REQUIRE(fmt.features.size() == 4);
        REQUIRE(fmt.features[3].kind == ValueKind::MortalityEnum);

        bench::GoldCohort gold = bench::build_gold_cohort(
            bundle, bench::CohortCriteria::from_json(v2.criteria), fmt);
        std::set<std::string> tokens;
        for (const auto& row : gold.rows) tokens.insert(row[3]);
        CHECK(tokens.count("Dead") == 1);
        CHECK(tokens.count("Alive") == 1);
        CHECK(tokens.count("Unknown") == 1);
    }
}
