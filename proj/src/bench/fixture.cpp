#include "emrkit/bench/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "emrkit/bench/gold.hpp"
#include "emrkit/db/gateway.hpp"
#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::bench {

namespace {

using Cell = std::optional<std::string>;
using Row = std::vector<Cell>;

struct ItemDef {
    int code;
    const char* name;
    const char* unit;
    const char* extra;
    double lo;
    double hi;
};

// Charted observation dictionary. Entries with lo == hi are text-valued
// concepts that never receive numeric event rows; they exist so candidate
// listings contain plausible non-matches.
const ItemDef kMimicVitals[] = {
    {211, "Heart Rate", "bpm", "Routine Vital Signs", 55, 130},
    {618, "Respiratory Rate", "insp/min", "Routine Vital Signs", 10, 30},
    {676, "Temperature C", "Deg. C", "Routine Vital Signs", 35, 40},
    {51, "Arterial BP [Systolic]", "mmHg", "Hemodynamics", 90, 180},
    {8368, "Arterial BP [Diastolic]", "mmHg", "Hemodynamics", 50, 110},
    {52, "Arterial BP Mean", "mmHg", "Hemodynamics", 60, 120},
    {455, "NBP [Systolic]", "mmHg", "Routine Vital Signs", 90, 175},
    {646, "SpO2", "%", "Respiratory", 88, 100},
    {128, "Code Status", "", "Care Plans", 0, 0},
    {212, "Heart Rhythm", "", "Routine Vital Signs", 0, 0},
};

const ItemDef kMimicLabs[] = {
    {50809, "Glucose", "mg/dL", "Blood", 60, 300},
    {50813, "Lactate", "mmol/L", "Blood", 0.5, 8},
    {50803, "Bicarbonate", "mEq/L", "Blood", 15, 35},
    {50811, "Hemoglobin", "g/dL", "Blood", 7, 17},
    {50824, "Sodium, Whole Blood", "mEq/L", "Blood", 128, 150},
    {50822, "Potassium, Whole Blood", "mEq/L", "Blood", 2.8, 6},
    {50806, "Chloride, Whole Blood", "mEq/L", "Blood", 90, 115},
    {50912, "Creatinine", "mg/dL", "Blood", 0.4, 5},
    {50893, "Calcium, Total", "mg/dL", "Blood", 7, 11},
    {50960, "Magnesium", "mg/dL", "Blood", 1.2, 2.8},
    {51265, "Platelet Count", "K/uL", "Blood", 50, 450},
    {51301, "White Blood Cells", "K/uL", "Blood", 2, 25},
    {50820, "pH", "units", "Blood", 7.1, 7.6},
    {50821, "pO2", "mm Hg", "Blood", 60, 250},
    {51003, "Troponin T", "ng/mL", "Blood", 0.0, 2.0},
    {50868, "Anion Gap", "mEq/L", "Blood", 8, 20},
    {51006, "Urea Nitrogen", "mg/dL", "Blood", 5, 60},
    {50885, "Bilirubin, Total", "mg/dL", "Blood", 0.2, 5},
    {50808, "Free Calcium", "mmol/L", "Blood", 0.9, 1.4},
};

struct LabDef {
    const char* name;
    const char* unit;
    double lo;
    double hi;
};

const LabDef kEicuLabs[] = {
    {"glucose", "mg/dL", 60, 300},
    {"lactate", "mmol/L", 0.5, 8},
    {"bicarbonate", "mmol/L", 15, 35},
    {"Hgb", "g/dL", 7, 17},
    {"sodium", "mmol/L", 128, 150},
    {"potassium", "mmol/L", 2.8, 6},
    {"chloride", "mmol/L", 90, 115},
    {"creatinine", "mg/dL", 0.4, 5},
    {"calcium", "mg/dL", 7, 11},
    {"magnesium", "mg/dL", 1.2, 2.8},
    {"platelets x 1000", "K/mcL", 50, 450},
    {"WBC x 1000", "K/mcL", 2, 25},
    {"pH", "", 7.1, 7.6},
    {"paO2", "mm Hg", 60, 250},
    {"troponin - T", "ng/mL", 0.0, 2.0},
    {"anion gap", "mmol/L", 8, 20},
    {"BUN", "mg/dL", 5, 60},
    {"total bilirubin", "mg/dL", 0.2, 5},
};

struct VitalColDef {
    const char* name;
    double lo;
    double hi;
};

const VitalColDef kEicuVitalCols[] = {
    {"heartrate", 55, 130},
    {"respiratoryrate", 10, 30},
    {"sao2", 88, 100},
    {"temperature", 35, 40},
    {"systemicsystolic", 90, 180},
    {"systemicdiastolic", 50, 110},
    {"systemicmean", 60, 120},
};

struct RefDef {
    int id;
    const char* name;
    const char* unit;
    double lo;
    double hi;
};

const RefDef kSicRefs[] = {
    {735, "Male", "", 0, 0},
    {736, "Female", "", 0, 0},
    {737, "Deceased", "", 0, 0},
    {738, "Regular discharge", "", 0, 0},
    {708, "HeartRateECG", "1/min", 55, 130},
    {709, "RespirationRate", "1/min", 10, 30},
    {710, "CoreTemperature", "C", 35, 40},
    {711, "ArterialPressureSystolic", "mmHg", 90, 180},
    {712, "ArterialPressureDiastolic", "mmHg", 50, 110},
    {713, "ArterialPressureMean", "mmHg", 60, 120},
    {714, "SpO2", "%", 88, 100},
    {656, "Glukose (BGA)", "mg/dL", 60, 300},
    {348, "Glukose (ZL)", "mg/dL", 60, 300},
    {657, "Laktat (BGA)", "mmol/L", 0.5, 8},
    {658, "Bikarbonat (BGA)", "mmol/L", 15, 35},
    {659, "Haemoglobin (BGA)", "g/dL", 7, 17},
    {660, "Natrium (BGA)", "mmol/L", 128, 150},
    {661, "Kalium (BGA)", "mmol/L", 2.8, 6},
    {662, "Chlorid (BGA)", "mmol/L", 90, 115},
    {663, "Kreatinin (ZL)", "mg/dL", 0.4, 5},
    {664, "Calcium (ZL)", "mg/dL", 7, 11},
    {665, "Magnesium (ZL)", "mg/dL", 1.2, 2.8},
    {666, "Thrombozyten (ZL)", "G/L", 50, 450},
    {667, "Leukozyten (ZL)", "G/L", 2, 25},
    {668, "pH (BGA)", "", 7.1, 7.6},
    {669, "pO2 (BGA)", "mmHg", 60, 250},
    {670, "Troponin-T (ZL)", "ng/mL", 0.0, 2.0},
    {671, "Harnstoff (ZL)", "mg/dL", 5, 60},
    {672, "Bilirubin gesamt (ZL)", "mg/dL", 0.2, 5},
    {673, "CRP (ZL)", "mg/L", 1, 300},
};

// Deterministic patients seeded into every fixture so each scripted request
// is guaranteed a non-empty gold cohort regardless of the random population.
struct AnchorDef {
    int age;
    bool male;
    // nullopt means the mortality outcome was never recorded.
    std::optional<int> expire;
    // Stay duration in 36-second ticks, so hours always carry at most two
    // decimals and never sit on a rounding boundary.
    long long dur_ticks;
    // Forced bicarbonate record count, -1 to draw randomly.
    int bicarb;
};

const AnchorDef kAnchors[] = {
    {19, true, 0, 5000, -1},
    {24, true, 0, 4000, -1},
    {29, true, 0, 3456, -1},
    {61, false, 1, 3500, -1},
    {65, false, 0, 4250, -1},
    {69, false, std::nullopt, 3000, -1},
    {20, true, 0, 2500, 15},
    {25, true, 1, 3200, 18},
    {30, true, 0, 2800, 22},
};

std::string dec1(util::Rng& rng, double lo, double hi) {
    long long t = rng.range(std::llround(lo * 10), std::llround(hi * 10));
    return util::format_decimal(static_cast<double>(t) / 10.0, 1);
}

std::string ll_str(long long v) { return std::to_string(v); }

TableData& add_table(Dataset& d, const std::string& name, const std::string& ddl,
                     std::vector<std::string> columns) {
    TableData t;
    t.name = name;
    t.ddl = ddl;
    t.columns = std::move(columns);
    d.tables.push_back(std::move(t));
    return d.tables.back();
}

std::string render_cell_csv(const Cell& c) {
    if (!c.has_value()) return "";
    const std::string& s = *c;
    if (s.empty()) return "\"\"";
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string render_table_csv(const TableData& t) {
    std::string out = util::csv_render_row(t.columns);
    for (const Row& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ',';
            out += render_cell_csv(row[i]);
        }
        out += '\n';
    }
    return out;
}

struct RequestTexts {
    std::string v3_records_clause;
    std::string v3_code;
};

std::vector<CohortRequest> standard_requests(const RequestTexts& t) {
    const std::string features_los =
        "ICU stay id, gender (Male or Female or Unknown), age (integer), "
        "length of ICU stay in hours (a float number rounded to 4 decimal places)";
    const std::string features_mortality =
        "ICU stay id, gender (Male or Female or Unknown), age (integer), "
        "mortality status (Dead or Alive or Unknown)";

    std::vector<CohortRequest> out;

    CohortRequest v1;
    v1.name = "v1_demographics";
    v1.cohort_text =
        "Include only patients aged between 19 and 29 who were admitted to the ICU. "
        "Include only Male patients. Exclude ICU stays with missing discharge time. "
        "Exclude patients with multiple ICU stays.";
    v1.feature_text = features_los;
    {
        CohortCriteria c;
        c.age_min = 19;
        c.age_max = 29;
        c.gender = CohortCriteria::GenderFilter::Male;
        c.exclude_missing_discharge = true;
        c.exclude_multiple_stays = true;
        v1.criteria = c.to_json();
    }
    out.push_back(std::move(v1));

    CohortRequest v2;
    v2.name = "v2_duration";
    v2.cohort_text =
        "Include only patients aged between 61 and 69 who were admitted to the ICU. "
        "Include only Female patients. Include only ICU stays that lasted at least 30 hours.";
    v2.feature_text = features_mortality;
    {
        CohortCriteria c;
        c.age_min = 61;
        c.age_max = 69;
        c.gender = CohortCriteria::GenderFilter::Female;
        c.min_stay_hours = 30.0;
        v2.criteria = c.to_json();
    }
    out.push_back(std::move(v2));

    CohortRequest v3;
    v3.name = "v3_records";
    v3.cohort_text =
        "Include only patients aged between 19 and 30 who were admitted to the ICU. "
        "Include only Male patients. " +
        t.v3_records_clause;
    v3.feature_text = features_mortality;
    {
        CohortCriteria c;
        c.age_min = 19;
        c.age_max = 30;
        c.gender = CohortCriteria::GenderFilter::Male;
        RecordCountCriterion rc;
        rc.codes = {t.v3_code};
        rc.min_count = 15;
        c.min_clinical_records = rc;
        v3.criteria = c.to_json();
    }
    out.push_back(std::move(v3));

    return out;
}

void add_code_feature(FixtureBundle& b, const std::string& feature,
                      std::vector<std::pair<std::string, std::string>> codes) {
    MappingItem item;
    item.outcome = MappingItem::Outcome::RowCodes;
    item.codes = std::move(codes);
    b.mapping_gold.features[feature] = std::move(item);
    b.feature_names.push_back(feature);
}

void add_name_feature(FixtureBundle& b, const std::string& feature, std::vector<std::string> names) {
    MappingItem item;
    item.outcome = MappingItem::Outcome::NamesOnly;
    item.names = std::move(names);
    b.mapping_gold.features[feature] = std::move(item);
    b.feature_names.push_back(feature);
}

void add_column_feature(FixtureBundle& b, const std::string& feature, std::vector<std::string> refs) {
    MappingItem item;
    item.outcome = MappingItem::Outcome::ColumnRefs;
    item.column_refs = std::move(refs);
    b.mapping_gold.features[feature] = std::move(item);
    b.feature_names.push_back(feature);
}

void add_absent_feature(FixtureBundle& b, const std::string& feature) {
    MappingItem item;
    item.outcome = MappingItem::Outcome::Absent;
    b.mapping_gold.features[feature] = std::move(item);
    b.feature_names.push_back(feature);
}

void build_mimic(FixtureBundle& b, util::Rng& rng) {
    Dataset& d = b.dataset;
    d.database_name = "mimiclike";
    d.tables.reserve(8);

    TableData& patients = add_table(
        d, "patients",
        "CREATE TABLE patients (\n"
        "  subject_id INTEGER PRIMARY KEY,\n"
        "  gender_code INTEGER\n"
        ");",
        {"subject_id", "gender_code"});
    TableData& admissions = add_table(
        d, "admissions",
        "CREATE TABLE admissions (\n"
        "  hadm_id INTEGER PRIMARY KEY,\n"
        "  subject_id INTEGER NOT NULL REFERENCES patients(subject_id),\n"
        "  admittime INTEGER NOT NULL,\n"
        "  dischtime INTEGER,\n"
        "  admission_age INTEGER NOT NULL,\n"
        "  hospital_expire_flag INTEGER\n"
        ");",
        {"hadm_id", "subject_id", "admittime", "dischtime", "admission_age", "hospital_expire_flag"});
    TableData& icustays = add_table(
        d, "icustays",
        "CREATE TABLE icustays (\n"
        "  icustay_id INTEGER PRIMARY KEY,\n"
        "  hadm_id INTEGER NOT NULL REFERENCES admissions(hadm_id),\n"
        "  subject_id INTEGER NOT NULL REFERENCES patients(subject_id),\n"
        "  intime INTEGER NOT NULL,\n"
        "  outtime INTEGER\n"
        ");",
        {"icustay_id", "hadm_id", "subject_id", "intime", "outtime"});
    TableData& d_items = add_table(
        d, "d_items",
        "CREATE TABLE d_items (\n"
        "  itemid INTEGER PRIMARY KEY,\n"
        "  label TEXT NOT NULL,\n"
        "  unitname TEXT,\n"
        "  category TEXT\n"
        ");",
        {"itemid", "label", "unitname", "category"});
    TableData& d_labitems = add_table(
        d, "d_labitems",
        "CREATE TABLE d_labitems (\n"
        "  itemid INTEGER PRIMARY KEY,\n"
        "  label TEXT NOT NULL,\n"
        "  unitname TEXT,\n"
        "  fluid TEXT\n"
        ");",
        {"itemid", "label", "unitname", "fluid"});
    TableData& chartevents = add_table(
        d, "chartevents",
        "CREATE TABLE chartevents (\n"
        "  icustay_id INTEGER NOT NULL REFERENCES icustays(icustay_id),\n"
        "  itemid INTEGER NOT NULL REFERENCES d_items(itemid),\n"
        "  charttime INTEGER NOT NULL,\n"
        "  valuenum REAL,\n"
        "  valueuom TEXT\n"
        ");",
        {"icustay_id", "itemid", "charttime", "valuenum", "valueuom"});
    TableData& labevents = add_table(
        d, "labevents",
        "CREATE TABLE labevents (\n"
        "  icustay_id INTEGER NOT NULL REFERENCES icustays(icustay_id),\n"
        "  itemid INTEGER NOT NULL REFERENCES d_labitems(itemid),\n"
        "  charttime INTEGER NOT NULL,\n"
        "  valuenum REAL,\n"
        "  valueuom TEXT\n"
        ");",
        {"icustay_id", "itemid", "charttime", "valuenum", "valueuom"});

    for (const ItemDef& item : kMimicVitals)
        d_items.rows.push_back({ll_str(item.code), std::string(item.name), std::string(item.unit),
                                std::string(item.extra)});
    for (const ItemDef& item : kMimicLabs)
        d_labitems.rows.push_back({ll_str(item.code), std::string(item.name), std::string(item.unit),
                                   std::string(item.extra)});

    long long stay_seq = 0;
    auto emit_stay = [&](long long subject, int age, std::optional<int> expire, bool has_out,
                         long long dur_ticks, int bicarb_n) {
        ++stay_seq;
        long long hadm = 1000 + stay_seq;
        long long stay = 20000 + stay_seq;
        long long admit = 1700000000LL + stay_seq * 7200 + 36 * rng.range(0, 40);
        long long intime = admit + 36 * rng.range(0, 50);
        long long dur = 36 * dur_ticks;
        std::optional<long long> outtime;
        if (has_out) outtime = intime + dur;
        admissions.rows.push_back({ll_str(hadm), ll_str(subject), ll_str(admit),
                                   outtime ? Cell(ll_str(*outtime + 7200)) : std::nullopt,
                                   ll_str(age), expire ? Cell(ll_str(*expire)) : std::nullopt});
        icustays.rows.push_back({ll_str(stay), ll_str(hadm), ll_str(subject), ll_str(intime),
                                 outtime ? Cell(ll_str(*outtime)) : std::nullopt});

        long long horizon = has_out ? dur_ticks : 2400;
        for (const ItemDef& item : kMimicVitals) {
            if (item.lo == item.hi) continue;
            long long n = rng.range(1, 5);
            for (long long i = 0; i < n; ++i)
                chartevents.rows.push_back({ll_str(stay), ll_str(item.code),
                                            ll_str(intime + 36 * rng.range(0, horizon)),
                                            dec1(rng, item.lo, item.hi), std::string(item.unit)});
        }
        for (const ItemDef& item : kMimicLabs) {
            long long n = item.code == 50803 ? rng.range(0, 25) : rng.range(0, 3);
            if (item.code == 50803 && bicarb_n >= 0) n = bicarb_n;
            for (long long i = 0; i < n; ++i)
                labevents.rows.push_back({ll_str(stay), ll_str(item.code),
                                          ll_str(intime + 36 * rng.range(0, horizon)),
                                          dec1(rng, item.lo, item.hi), std::string(item.unit)});
        }
    };

    for (int k = 0; k < b.spec.patient_count; ++k) {
        long long subject = 100 + k;
        std::optional<int> gender_code;
        if (!rng.chance(0.04)) gender_code = rng.chance(0.5) ? 23 : 24;
        patients.rows.push_back(
            {ll_str(subject), gender_code ? Cell(ll_str(*gender_code)) : std::nullopt});
        long long r = rng.range(1, 10);
        int n_stays = r <= 6 ? 1 : (r <= 9 ? 2 : 3);
        for (int s = 0; s < n_stays; ++s) {
            int age = static_cast<int>(rng.range(16, 89));
            long long er = rng.range(1, 10);
            std::optional<int> expire;
            if (er <= 7)
                expire = 0;
            else if (er <= 9)
                expire = 1;
            emit_stay(subject, age, expire, !rng.chance(0.06), rng.range(600, 40000), -1);
        }
    }
    long long anchor_subject = 900;
    for (const AnchorDef& a : kAnchors) {
        patients.rows.push_back({ll_str(anchor_subject), ll_str(a.male ? 23 : 24)});
        emit_stay(anchor_subject, a.age, a.expire, true, a.dur_ticks, a.bicarb);
        ++anchor_subject;
    }

    b.manual_text =
        "MimicLike Database Manual\n"
        "\n"
        "This database stores de-identified ICU admissions in a star layout.\n"
        "\n"
        "patients\n"
        "  One row per patient. gender_code holds the coded sex of the patient:\n"
        "  23 means Male and 24 means Female. A missing gender_code means the sex\n"
        "  was never recorded.\n"
        "\n"
        "admissions\n"
        "  One row per hospital admission. admission_age is the patient age in\n"
        "  years at admission time. hospital_expire_flag records in-hospital\n"
        "  mortality: 1 means the patient died before discharge, 0 means the\n"
        "  patient left the hospital alive, and a missing flag means the outcome\n"
        "  is unknown. admittime and dischtime are Unix epoch seconds.\n"
        "\n"
        "icustays\n"
        "  One row per ICU stay, linked to admissions by hadm_id and to patients\n"
        "  by subject_id. intime and outtime are Unix epoch seconds; outtime is\n"
        "  missing when no discharge was recorded for the stay. The length of a\n"
        "  stay in hours is (outtime - intime) / 3600.0.\n"
        "\n"
        "d_items\n"
        "  Dictionary of charted observation concepts such as vital signs.\n"
        "  itemid is the concept code, label the concept name, unitname the\n"
        "  measurement unit.\n"
        "\n"
        "d_labitems\n"
        "  Dictionary of laboratory measurement concepts with the same shape as\n"
        "  d_items.\n"
        "\n"
        "chartevents\n"
        "  Bedside observations. Each row carries the icustay_id of the stay,\n"
        "  the itemid of the concept (resolved through d_items), the charttime\n"
        "  in epoch seconds, and the numeric reading in valuenum with its unit\n"
        "  in valueuom.\n"
        "\n"
        "labevents\n"
        "  Laboratory results. Each row carries the icustay_id of the stay and\n"
        "  the itemid of the concept, resolved through d_labitems.\n";

    b.memo_text =
        "Evaluation Memo\n"
        "\n"
        "The cohort table must contain exactly the requested columns in the\n"
        "requested order, one row per selected ICU stay.\n"
        "\n"
        "  - The stay identifier column must hold the icustay_id value.\n"
        "  - Gender must be one of the literal tokens Male, Female, Unknown.\n"
        "  - Mortality must be one of the literal tokens Dead, Alive, Unknown.\n"
        "  - Age must be a plain integer.\n"
        "  - Stay length must be expressed in hours and rounded to 4 decimal\n"
        "    places.\n"
        "\n"
        "Age criteria are inclusive on both ends, and a duration criterion such\n"
        "as \"at least 30 hours\" is inclusive. Exclusion of patients with\n"
        "multiple ICU stays counts every stay present in the database.\n";

    add_code_feature(b, "Heart rate", {{"211", "Heart Rate"}});
    add_code_feature(b, "Respiratory rate", {{"618", "Respiratory Rate"}});
    add_code_feature(b, "Core temperature", {{"676", "Temperature C"}});
    add_code_feature(b, "Systolic arterial pressure", {{"51", "Arterial BP [Systolic]"}});
    add_code_feature(b, "Diastolic arterial pressure", {{"8368", "Arterial BP [Diastolic]"}});
    add_code_feature(b, "Mean arterial pressure", {{"52", "Arterial BP Mean"}});
    add_code_feature(b, "Non-invasive systolic arterial pressure", {{"455", "NBP [Systolic]"}});
    add_code_feature(b, "Oxygen saturation", {{"646", "SpO2"}});
    add_code_feature(b, "Glucose", {{"50809", "Glucose"}});
    add_code_feature(b, "Lactate", {{"50813", "Lactate"}});
    add_code_feature(b, "Bicarbonate", {{"50803", "Bicarbonate"}});
    add_code_feature(b, "Hemoglobin", {{"50811", "Hemoglobin"}});
    add_code_feature(b, "Sodium", {{"50824", "Sodium, Whole Blood"}});
    add_code_feature(b, "Potassium", {{"50822", "Potassium, Whole Blood"}});
    add_code_feature(b, "Chloride", {{"50806", "Chloride, Whole Blood"}});
    add_code_feature(b, "Creatinine", {{"50912", "Creatinine"}});
    add_code_feature(b, "Calcium", {{"50893", "Calcium, Total"}});
    add_code_feature(b, "Magnesium", {{"50960", "Magnesium"}});
    add_code_feature(b, "Platelets", {{"51265", "Platelet Count"}});
    add_code_feature(b, "Leukocytes", {{"51301", "White Blood Cells"}});
    add_code_feature(b, "pH", {{"50820", "pH"}});
    add_code_feature(b, "Oxygen partial pressure", {{"50821", "pO2"}});
    add_code_feature(b, "Troponin T", {{"51003", "Troponin T"}});
    add_absent_feature(b, "aPTT");

    for (const ItemDef& item : kMimicVitals)
        b.mapping_gold.code_universe.emplace_back(ll_str(item.code), item.name);
    for (const ItemDef& item : kMimicLabs)
        b.mapping_gold.code_universe.emplace_back(ll_str(item.code), item.name);

    RequestTexts texts;
    texts.v3_records_clause =
        "Include only ICU stays having at least 15 laboratory records of Bicarbonate "
        "(itemid 50803).";
    texts.v3_code = "50803";
    b.requests = standard_requests(texts);
}

void build_eicu(FixtureBundle& b, util::Rng& rng) {
    Dataset& d = b.dataset;
    d.database_name = "eiculike";
    d.tables.reserve(4);

    TableData& patient = add_table(
        d, "patient",
        "CREATE TABLE patient (\n"
        "  patientunitstayid INTEGER PRIMARY KEY,\n"
        "  uniquepid TEXT NOT NULL,\n"
        "  unitvisitnumber INTEGER NOT NULL,\n"
        "  gender TEXT,\n"
        "  age TEXT,\n"
        "  hospitaldischargestatus TEXT,\n"
        "  unitdischargeoffset INTEGER\n"
        ");",
        {"patientunitstayid", "uniquepid", "unitvisitnumber", "gender", "age",
         "hospitaldischargestatus", "unitdischargeoffset"});
    TableData& vitalperiodic = add_table(
        d, "vitalperiodic",
        "CREATE TABLE vitalperiodic (\n"
        "  patientunitstayid INTEGER NOT NULL REFERENCES patient(patientunitstayid),\n"
        "  observationoffset INTEGER NOT NULL,\n"
        "  heartrate REAL,\n"
        "  respiratoryrate REAL,\n"
        "  sao2 REAL,\n"
        "  temperature REAL,\n"
        "  systemicsystolic REAL,\n"
        "  systemicdiastolic REAL,\n"
        "  systemicmean REAL\n"
        ");",
        {"patientunitstayid", "observationoffset", "heartrate", "respiratoryrate", "sao2",
         "temperature", "systemicsystolic", "systemicdiastolic", "systemicmean"});
    TableData& lab = add_table(
        d, "lab",
        "CREATE TABLE lab (\n"
        "  patientunitstayid INTEGER NOT NULL REFERENCES patient(patientunitstayid),\n"
        "  labresultoffset INTEGER NOT NULL,\n"
        "  labname TEXT NOT NULL,\n"
        "  labresult REAL,\n"
        "  labmeasurenamesystem TEXT\n"
        ");",
        {"patientunitstayid", "labresultoffset", "labname", "labresult", "labmeasurenamesystem"});

    long long stay_seq = 0;
    auto emit_stay = [&](const std::string& pid, int visit, const std::string& gender,
                         const std::string& age, const std::string& status,
                         std::optional<long long> discharge_min, int bicarb_n) {
        ++stay_seq;
        long long stay = 200000 + stay_seq;
        patient.rows.push_back({ll_str(stay), pid, ll_str(visit), gender, age, status,
                                discharge_min ? Cell(ll_str(*discharge_min)) : std::nullopt});

        long long horizon = discharge_min ? *discharge_min : 2880;
        long long n_obs = rng.range(8, 20);
        for (long long i = 0; i < n_obs; ++i) {
            Row row;
            row.push_back(ll_str(stay));
            row.push_back(ll_str(3 * rng.range(0, horizon / 3)));
            for (const VitalColDef& v : kEicuVitalCols) {
                if (rng.chance(0.85))
                    row.push_back(dec1(rng, v.lo, v.hi));
                else
                    row.push_back(std::nullopt);
            }
            vitalperiodic.rows.push_back(std::move(row));
        }
        for (const LabDef& l : kEicuLabs) {
            bool is_bicarb = std::string(l.name) == "bicarbonate";
            long long n = is_bicarb ? rng.range(0, 25) : rng.range(0, 3);
            if (is_bicarb && bicarb_n >= 0) n = bicarb_n;
            for (long long i = 0; i < n; ++i)
                lab.rows.push_back({ll_str(stay), ll_str(3 * rng.range(0, horizon / 3)),
                                    std::string(l.name), dec1(rng, l.lo, l.hi),
                                    std::string(l.unit)});
        }
    };

    auto pid_of = [](int idx) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "P%04d", idx);
        return std::string(buf);
    };

    for (int k = 0; k < b.spec.patient_count; ++k) {
        std::string pid = pid_of(k);
        std::string gender = rng.chance(0.08) ? "" : (rng.chance(0.5) ? "Male" : "Female");
        int n_stays = rng.chance(0.35) ? 2 : 1;
        for (int s = 0; s < n_stays; ++s) {
            std::string age = rng.chance(0.05) ? "" : ll_str(rng.range(16, 89));
            long long sr = rng.range(1, 100);
            std::string status = sr <= 70 ? "Alive" : (sr <= 88 ? "Expired" : "");
            std::optional<long long> discharge;
            if (!rng.chance(0.06)) discharge = 3 * rng.range(120, 8000);
            emit_stay(pid, s + 1, gender, age, status, discharge, -1);
        }
    }
    int anchor_idx = 9000;
    for (const AnchorDef& a : kAnchors) {
        std::string status = "";
        if (a.expire.has_value()) status = *a.expire == 1 ? "Expired" : "Alive";
        // Anchor durations in minutes; ticks are 36 s, so minutes = ticks * 0.6.
        long long minutes = a.dur_ticks * 36 / 60;
        emit_stay(pid_of(anchor_idx), 1, a.male ? "Male" : "Female", ll_str(a.age), status,
                  minutes, a.bicarb);
        ++anchor_idx;
    }

    b.manual_text =
        "EicuLike Database Manual\n"
        "\n"
        "patient\n"
        "  One row per ICU unit stay. patientunitstayid identifies the stay.\n"
        "  uniquepid identifies the patient across stays and unitvisitnumber\n"
        "  orders the stays of one patient. gender holds the literal strings\n"
        "  Male or Female; an empty string means the sex was not recorded. age\n"
        "  holds the age in years as text; an empty string means the age is\n"
        "  missing. hospitaldischargestatus is Alive or Expired, or an empty\n"
        "  string when the outcome is unknown. unitdischargeoffset is the\n"
        "  number of minutes between unit admission and unit discharge and is\n"
        "  missing while no discharge was recorded. The length of a stay in\n"
        "  hours is unitdischargeoffset / 60.0.\n"
        "\n"
        "vitalperiodic\n"
        "  Periodically sampled vital signs, one row per sampling instant.\n"
        "  observationoffset gives minutes since unit admission. Each vital\n"
        "  sign lives in its own numeric column (heartrate, respiratoryrate,\n"
        "  sao2, temperature, systemicsystolic, systemicdiastolic,\n"
        "  systemicmean); a missing cell means the signal was not measured at\n"
        "  that instant.\n"
        "\n"
        "lab\n"
        "  Laboratory results identified by name. labname holds the test name\n"
        "  as a plain string, labresult the numeric value,\n"
        "  labmeasurenamesystem the unit, labresultoffset minutes since unit\n"
        "  admission. There is no laboratory code dictionary in this database.\n";

    b.memo_text =
        "Evaluation Memo\n"
        "\n"
        "The cohort table must contain exactly the requested columns in the\n"
        "requested order, one row per selected ICU stay.\n"
        "\n"
        "  - The stay identifier column must hold the patientunitstayid value.\n"
        "  - Gender must be one of the literal tokens Male, Female, Unknown.\n"
        "  - Mortality must be one of the literal tokens Dead, Alive, Unknown;\n"
        "    Expired records count as Dead.\n"
        "  - Age is stored as text and must be reported as a plain integer.\n"
        "    Treat empty strings as missing values, not as zero.\n"
        "  - Stay length must be expressed in hours and rounded to 4 decimal\n"
        "    places.\n"
        "\n"
        "Age criteria are inclusive on both ends, and a duration criterion such\n"
        "as \"at least 30 hours\" is inclusive. Exclusion of patients with\n"
        "multiple ICU stays counts every stay present in the database.\n";

    add_column_feature(b, "Heart rate", {"vitalperiodic.heartrate"});
    add_column_feature(b, "Respiratory rate", {"vitalperiodic.respiratoryrate"});
    add_name_feature(b, "Glucose", {"glucose"});
    add_name_feature(b, "Lactate", {"lactate"});
    add_name_feature(b, "Bicarbonate", {"bicarbonate"});
    add_name_feature(b, "Hemoglobin", {"Hgb"});
    add_name_feature(b, "Sodium", {"sodium"});
    add_name_feature(b, "Potassium", {"potassium"});
    add_name_feature(b, "Chloride", {"chloride"});
    add_name_feature(b, "Creatinine", {"creatinine"});
    add_name_feature(b, "Calcium", {"calcium"});
    add_name_feature(b, "Magnesium", {"magnesium"});
    add_name_feature(b, "Platelets", {"platelets x 1000"});
    add_name_feature(b, "Leukocytes", {"WBC x 1000"});
    add_name_feature(b, "pH", {"pH"});
    add_name_feature(b, "Oxygen partial pressure", {"paO2"});
    add_name_feature(b, "Troponin T", {"troponin - T"});
    add_absent_feature(b, "aPTT");
    add_absent_feature(b, "Fibrinogen");
    add_absent_feature(b, "Bilirubin direct");

    for (const LabDef& l : kEicuLabs) b.mapping_gold.name_universe.emplace_back(l.name);
    for (const VitalColDef& v : kEicuVitalCols)
        b.mapping_gold.column_universe.emplace_back(std::string("vitalperiodic.") + v.name);

    RequestTexts texts;
    texts.v3_records_clause =
        "Include only ICU stays having at least 15 laboratory records of bicarbonate.";
    texts.v3_code = "bicarbonate";
    b.requests = standard_requests(texts);
}

void build_sic(FixtureBundle& b, util::Rng& rng) {
    Dataset& d = b.dataset;
    d.database_name = "siclike";
    d.tables.reserve(4);

    TableData& refs = add_table(
        d, "sic_references",
        "CREATE TABLE sic_references (\n"
        "  reference_id INTEGER PRIMARY KEY,\n"
        "  reference_name TEXT NOT NULL,\n"
        "  reference_unit TEXT\n"
        ");",
        {"reference_id", "reference_name", "reference_unit"});
    TableData& cases = add_table(
        d, "cases",
        "CREATE TABLE cases (\n"
        "  case_id INTEGER PRIMARY KEY,\n"
        "  patient_id INTEGER NOT NULL,\n"
        "  admission_age INTEGER NOT NULL,\n"
        "  sex_reference INTEGER REFERENCES sic_references(reference_id),\n"
        "  icu_admission_time INTEGER NOT NULL,\n"
        "  icu_discharge_time INTEGER,\n"
        "  discharge_state_reference INTEGER REFERENCES sic_references(reference_id)\n"
        ");",
        {"case_id", "patient_id", "admission_age", "sex_reference", "icu_admission_time",
         "icu_discharge_time", "discharge_state_reference"});
    TableData& signals = add_table(
        d, "signals",
        "CREATE TABLE signals (\n"
        "  case_id INTEGER NOT NULL REFERENCES cases(case_id),\n"
        "  reference_id INTEGER NOT NULL REFERENCES sic_references(reference_id),\n"
        "  offset_seconds INTEGER NOT NULL,\n"
        "  value_float REAL\n"
        ");",
        {"case_id", "reference_id", "offset_seconds", "value_float"});

    for (const RefDef& r : kSicRefs)
        refs.rows.push_back({ll_str(r.id), std::string(r.name), std::string(r.unit)});

    long long stay_seq = 0;
    auto emit_case = [&](long long patient_id, int age, std::optional<int> sex_ref,
                         std::optional<int> state_ref, bool has_out, long long dur_ticks,
                         int bicarb_n) {
        ++stay_seq;
        long long case_id = 500000 + stay_seq;
        long long admit = 1700000000LL + stay_seq * 7200 + 36 * rng.range(0, 40);
        long long dur = 36 * dur_ticks;
        std::optional<long long> discharge;
        if (has_out) discharge = admit + dur;
        cases.rows.push_back({ll_str(case_id), ll_str(patient_id), ll_str(age),
                              sex_ref ? Cell(ll_str(*sex_ref)) : std::nullopt, ll_str(admit),
                              discharge ? Cell(ll_str(*discharge)) : std::nullopt,
                              state_ref ? Cell(ll_str(*state_ref)) : std::nullopt});

        long long horizon = has_out ? dur_ticks : 2400;
        for (const RefDef& r : kSicRefs) {
            if (r.lo == r.hi) continue;
            long long n;
            if (r.id == 658) {
                n = bicarb_n >= 0 ? bicarb_n : rng.range(0, 25);
            } else if (r.id >= 708 && r.id <= 714) {
                n = rng.range(1, 5);
            } else {
                n = rng.range(0, 3);
            }
            for (long long i = 0; i < n; ++i)
                signals.rows.push_back({ll_str(case_id), ll_str(r.id),
                                        ll_str(36 * rng.range(0, horizon)),
                                        dec1(rng, r.lo, r.hi)});
        }
    };

    for (int k = 0; k < b.spec.patient_count; ++k) {
        long long patient_id = 70000 + k;
        std::optional<int> sex_ref;
        if (!rng.chance(0.07)) sex_ref = rng.chance(0.5) ? 735 : 736;
        int n_stays = rng.chance(0.25) ? 2 : 1;
        for (int s = 0; s < n_stays; ++s) {
            int age = static_cast<int>(rng.range(16, 89));
            long long sr = rng.range(1, 10);
            std::optional<int> state;
            if (sr <= 7)
                state = 738;
            else if (sr <= 9)
                state = 737;
            emit_case(patient_id, age, sex_ref, state, !rng.chance(0.05), rng.range(600, 40000), -1);
        }
    }
    long long anchor_patient = 79000;
    for (const AnchorDef& a : kAnchors) {
        std::optional<int> state;
        if (a.expire.has_value()) state = *a.expire == 1 ? 737 : 738;
        emit_case(anchor_patient, a.age, a.male ? 735 : 736, state, true, a.dur_ticks, a.bicarb);
        ++anchor_patient;
    }

    b.manual_text =
        "SicLike Database Manual\n"
        "\n"
        "sic_references\n"
        "  Central reference dictionary. Every coded concept in the database\n"
        "  resolves here: reference_id is the code, reference_name the concept\n"
        "  name, reference_unit the measurement unit where applicable. The\n"
        "  dictionary covers demographic codes as well as signal concepts:\n"
        "  code 735 means Male, 736 means Female, 737 means Deceased, and 738\n"
        "  means Regular discharge.\n"
        "\n"
        "cases\n"
        "  One row per ICU case (stay). patient_id identifies the patient\n"
        "  across cases. admission_age is the age in years. sex_reference\n"
        "  points into sic_references (735 or 736) and is missing when the sex\n"
        "  was not recorded. icu_admission_time and icu_discharge_time are\n"
        "  Unix epoch seconds; icu_discharge_time is missing when no discharge\n"
        "  was recorded. discharge_state_reference points into sic_references\n"
        "  (737 or 738) and is missing when the outcome is unknown. The length\n"
        "  of a case in hours is (icu_discharge_time - icu_admission_time) /\n"
        "  3600.0.\n"
        "\n"
        "signals\n"
        "  Monitoring and laboratory values. Each row carries the case_id, the\n"
        "  reference_id of the concept (resolved through sic_references), the\n"
        "  offset_seconds since ICU admission, and the numeric reading in\n"
        "  value_float.\n";

    b.memo_text =
        "Evaluation Memo\n"
        "\n"
        "The cohort table must contain exactly the requested columns in the\n"
        "requested order, one row per selected ICU case.\n"
        "\n"
        "  - The stay identifier column must hold the case_id value.\n"
        "  - Gender must be one of the literal tokens Male, Female, Unknown.\n"
        "  - Mortality must be one of the literal tokens Dead, Alive, Unknown;\n"
        "    Deceased records count as Dead and Regular discharge as Alive.\n"
        "  - Age must be a plain integer.\n"
        "  - Stay length must be expressed in hours and rounded to 4 decimal\n"
        "    places.\n"
        "\n"
        "Age criteria are inclusive on both ends, and a duration criterion such\n"
        "as \"at least 30 hours\" is inclusive. Exclusion of patients with\n"
        "multiple ICU stays counts every case present in the database.\n";

    add_code_feature(b, "Heart rate", {{"708", "HeartRateECG"}});
    add_code_feature(b, "Respiratory rate", {{"709", "RespirationRate"}});
    add_code_feature(b, "Core temperature", {{"710", "CoreTemperature"}});
    add_code_feature(b, "Systolic arterial pressure", {{"711", "ArterialPressureSystolic"}});
    add_code_feature(b, "Diastolic arterial pressure", {{"712", "ArterialPressureDiastolic"}});
    add_code_feature(b, "Mean arterial pressure", {{"713", "ArterialPressureMean"}});
    add_code_feature(b, "Oxygen saturation", {{"714", "SpO2"}});
    add_code_feature(b, "Glucose", {{"656", "Glukose (BGA)"}, {"348", "Glukose (ZL)"}});
    add_code_feature(b, "Lactate", {{"657", "Laktat (BGA)"}});
    add_code_feature(b, "Bicarbonate", {{"658", "Bikarbonat (BGA)"}});
    add_code_feature(b, "Hemoglobin", {{"659", "Haemoglobin (BGA)"}});
    add_code_feature(b, "Sodium", {{"660", "Natrium (BGA)"}});
    add_code_feature(b, "Potassium", {{"661", "Kalium (BGA)"}});
    add_code_feature(b, "Chloride", {{"662", "Chlorid (BGA)"}});
    add_code_feature(b, "Creatinine", {{"663", "Kreatinin (ZL)"}});
    add_code_feature(b, "Calcium", {{"664", "Calcium (ZL)"}});
    add_code_feature(b, "Magnesium", {{"665", "Magnesium (ZL)"}});
    add_code_feature(b, "Platelets", {{"666", "Thrombozyten (ZL)"}});
    add_code_feature(b, "Leukocytes", {{"667", "Leukozyten (ZL)"}});
    add_code_feature(b, "pH", {{"668", "pH (BGA)"}});
    add_code_feature(b, "Oxygen partial pressure", {{"669", "pO2 (BGA)"}});
    add_code_feature(b, "Troponin T", {{"670", "Troponin-T (ZL)"}});
    add_absent_feature(b, "aPTT");
    add_absent_feature(b, "Fibrinogen");

    for (const RefDef& r : kSicRefs)
        b.mapping_gold.code_universe.emplace_back(ll_str(r.id), r.name);

    RequestTexts texts;
    texts.v3_records_clause =
        "Include only ICU stays having at least 15 records of Bikarbonat (BGA) "
        "(reference id 658).";
    texts.v3_code = "658";
    b.requests = standard_requests(texts);
}

}  // namespace

FixtureStyle parse_style(const std::string& name) {
    std::string n = util::normalize_alnum(name);
    if (n == "mimiclike" || n == "mimic") return FixtureStyle::MimicLike;
    if (n == "eiculike" || n == "eicu") return FixtureStyle::EicuLike;
    if (n == "siclike" || n == "sic") return FixtureStyle::SicLike;
    throw config_error("unknown fixture style: " + name +
                       " (expected mimiclike, eiculike, or siclike)");
}

std::string style_name(FixtureStyle style) {
    switch (style) {
        case FixtureStyle::MimicLike: return "mimiclike";
        case FixtureStyle::EicuLike: return "eiculike";
        case FixtureStyle::SicLike: return "siclike";
    }
    return "mimiclike";
}

const TableData* Dataset::find(const std::string& table_name) const {
    for (const TableData& t : tables)
        if (t.name == table_name) return &t;
    return nullptr;
}

Json MappingItem::to_json() const {
    Json j = Json::object();
    j["outcome"] = outcome_name(outcome);
    j["column_refs"] = column_refs;
    Json code_list = Json::array();
    for (const auto& [code, name] : codes) code_list.push_back(Json::array({code, name}));
    j["codes"] = std::move(code_list);
    j["names"] = names;
    return j;
}

MappingItem MappingItem::from_json(const Json& j) {
    MappingItem item;
    item.outcome = parse_outcome(j.at("outcome").get<std::string>());
    if (j.contains("column_refs"))
        item.column_refs = j.at("column_refs").get<std::vector<std::string>>();
    if (j.contains("codes"))
        for (const Json& c : j.at("codes"))
            item.codes.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    if (j.contains("names")) item.names = j.at("names").get<std::vector<std::string>>();
    return item;
}

std::string MappingItem::outcome_name(Outcome o) {
    switch (o) {
        case Outcome::ColumnRefs: return "column_refs";
        case Outcome::RowCodes: return "row_codes";
        case Outcome::NamesOnly: return "names_only";
        case Outcome::Absent: return "absent";
    }
    return "absent";
}

MappingItem::Outcome MappingItem::parse_outcome(const std::string& s) {
    if (s == "column_refs") return Outcome::ColumnRefs;
    if (s == "row_codes") return Outcome::RowCodes;
    if (s == "names_only") return Outcome::NamesOnly;
    if (s == "absent") return Outcome::Absent;
    throw config_error("unknown mapping outcome: " + s);
}

Json MappingGold::to_json() const {
    Json j = Json::object();
    Json feats = Json::object();
    for (const auto& [name, item] : features) feats[name] = item.to_json();
    j["features"] = std::move(feats);
    Json codes = Json::array();
    for (const auto& [code, name] : code_universe) codes.push_back(Json::array({code, name}));
    j["code_universe"] = std::move(codes);
    j["name_universe"] = name_universe;
    j["column_universe"] = column_universe;
    return j;
}

MappingGold MappingGold::from_json(const Json& j) {
    MappingGold g;
    for (const auto& [name, item] : j.at("features").items())
        g.features[name] = MappingItem::from_json(item);
    if (j.contains("code_universe"))
        for (const Json& c : j.at("code_universe"))
            g.code_universe.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    if (j.contains("name_universe"))
        g.name_universe = j.at("name_universe").get<std::vector<std::string>>();
    if (j.contains("column_universe"))
        g.column_universe = j.at("column_universe").get<std::vector<std::string>>();
    return g;
}

FixtureBundle FixtureBundle::build(const FixtureSpec& spec) {
    if (spec.patient_count < 50)
        throw config_error("fixture patient_count must be at least 50, got " +
                           std::to_string(spec.patient_count));
    FixtureBundle b;
    b.spec = spec;
    util::Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(spec.style));
    switch (spec.style) {
        case FixtureStyle::MimicLike: build_mimic(b, rng); break;
        case FixtureStyle::EicuLike: build_eicu(b, rng); break;
        case FixtureStyle::SicLike: build_sic(b, rng); break;
    }
    return b;
}

void FixtureBundle::write_dir(const std::string& dir) const {
    util::ensure_dir(dir);
    util::ensure_dir(dir + "/data");
    util::ensure_dir(dir + "/docs");
    util::ensure_dir(dir + "/gold");

    std::string schema;
    for (const TableData& t : dataset.tables) schema += t.ddl + "\n";
    util::write_file(dir + "/schema.sql", schema);
    for (const TableData& t : dataset.tables)
        util::write_file(dir + "/data/" + t.name + ".csv", render_table_csv(t));
    util::write_file(dir + "/docs/manual.txt", manual_text);
    util::write_file(dir + "/docs/memo.txt", memo_text);
    util::write_file(dir + "/gold/mapping.json", mapping_gold.to_json().dump(2) + "\n");

    Json reqs = Json::array();
    for (const CohortRequest& r : requests) {
        Json jr = Json::object();
        jr["name"] = r.name;
        jr["cohort_text"] = r.cohort_text;
        jr["feature_text"] = r.feature_text;
        jr["criteria"] = r.criteria;
        reqs.push_back(std::move(jr));
    }
    util::write_file(dir + "/gold/requests.json", reqs.dump(2) + "\n");

    Json meta = Json::object();
    meta["database_name"] = dataset.database_name;
    meta["style"] = style_name(spec.style);
    meta["seed"] = spec.seed;
    meta["patient_count"] = spec.patient_count;
    Json tables = Json::array();
    for (const TableData& t : dataset.tables) {
        Json jt = Json::object();
        jt["name"] = t.name;
        jt["rows"] = t.rows.size();
        tables.push_back(std::move(jt));
    }
    meta["tables"] = std::move(tables);
    meta["feature_count"] = feature_names.size();
    meta["request_count"] = requests.size();
    util::write_file(dir + "/meta.json", meta.dump(2) + "\n");
}

void FixtureBundle::provision(const std::string& sqlite_path, bool overwrite) const {
    if (util::file_exists(sqlite_path)) {
        if (!overwrite)
            throw config_error("database file already exists: " + sqlite_path +
                               " (request overwrite to replace it)");
        std::remove(sqlite_path.c_str());
        std::remove((sqlite_path + "-wal").c_str());
        std::remove((sqlite_path + "-shm").c_str());
        std::remove((sqlite_path + "-journal").c_str());
    }
    db::AdminConnection admin(sqlite_path);
    for (const TableData& t : dataset.tables) admin.execute(t.ddl);
    admin.begin();
    for (const TableData& t : dataset.tables) {
        std::string sql = "INSERT INTO " + t.name + " (" + util::join(t.columns, ", ") + ") VALUES (";
        for (std::size_t i = 0; i < t.columns.size(); ++i) sql += i == 0 ? "?" : ", ?";
        sql += ")";
        for (const Row& row : t.rows) admin.execute_with_params(sql, row);
    }
    admin.commit();
}

std::string FixtureBundle::digest_text() const {
    std::string out = dataset.database_name + "\x1e";
    for (const TableData& t : dataset.tables) {
        out += t.ddl;
        out += "\x1e";
        out += render_table_csv(t);
        out += "\x1e";
    }
    out += manual_text + "\x1e" + memo_text + "\x1e";
    out += mapping_gold.to_json().dump() + "\x1e";
    for (const CohortRequest& r : requests)
        out += r.name + "\x1f" + r.cohort_text + "\x1f" + r.feature_text + "\x1f" +
               r.criteria.dump() + "\x1e";
    out += util::join(feature_names, "\x1f");
    return out;
}

}  // namespace emrkit::bench
