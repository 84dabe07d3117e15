#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emrkit/json.hpp"

namespace emrkit::bench {

enum class FixtureStyle {
  MimicLike,
  EicuLike,
  SicLike,
};

FixtureStyle parse_style(const std::string& name);
std::string style_name(FixtureStyle style);

struct FixtureSpec {
  FixtureStyle style = FixtureStyle::MimicLike;
  std::uint64_t seed = 7;
  int patient_count = 60;
};

// Canonical in-memory form of a generated database. Cells are optional so a
// missing value survives round trips through CSV ("" would be ambiguous for
// numeric columns).
struct TableData {
  std::string name;
  std::string ddl;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<std::string>>> rows;
};

struct Dataset {
  std::string database_name;
  std::vector<TableData> tables;

  const TableData* find(const std::string& table_name) const;
};

// Per-feature mapping answer. The same shape serves as the gold dictionary
// and as an agent's prediction so the scorer compares like with like.
struct MappingItem {
  enum class Outcome { ColumnRefs, RowCodes, NamesOnly, Absent };

  Outcome outcome = Outcome::Absent;
  std::vector<std::string> column_refs;
  std::vector<std::pair<std::string, std::string>> codes;
  std::vector<std::string> names;

  Json to_json() const;
  static MappingItem from_json(const Json& j);
  static std::string outcome_name(Outcome o);
  static Outcome parse_outcome(const std::string& s);
};

struct MappingGold {
  std::map<std::string, MappingItem> features;
  // Full universes backing specificity: every definition row, every lab name
  // string, every measurement column present in the fixture.
  std::vector<std::pair<std::string, std::string>> code_universe;
  std::vector<std::string> name_universe;
  std::vector<std::string> column_universe;

  Json to_json() const;
  static MappingGold from_json(const Json& j);
};

// One scripted cohort request: the free-text selections fed to the agent plus
// the structured criteria the oracle uses to derive the gold answer.
struct CohortRequest {
  std::string name;
  std::string cohort_text;
  std::string feature_text;
  Json criteria;
};

struct FixtureBundle {
  FixtureSpec spec;
  Dataset dataset;
  std::string manual_text;
  std::string memo_text;
  MappingGold mapping_gold;
  std::vector<std::string> feature_names;
  std::vector<CohortRequest> requests;

  static FixtureBundle build(const FixtureSpec& spec);

  // Serializes the bundle under dir: schema.sql, data/<table>.csv, docs/,
  // gold/mapping.json, gold/requests.json, meta.json.
  void write_dir(const std::string& dir) const;

  // Creates the SQLite database file and loads every table.
  void provision(const std::string& sqlite_path, bool overwrite) const;

  // Stable serialization used to assert rebuild determinism.
  std::string digest_text() const;
};

}  // namespace emrkit::bench
