#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sspn/csv.hpp"
#include "sspn/sketch.hpp"

namespace sspn {

enum class AttrType : uint8_t { integer = 0, floating = 1, categorical = 2, timestamp = 3 };

AttrType attr_type_from_string(const std::string& s);
const char* attr_type_name(AttrType t);

struct AttrSchema {
  std::string name;
  AttrType type = AttrType::integer;
  bool nullable = true;
};

struct RelationSchema {
  std::string name;
  std::vector<AttrSchema> attributes;

  int attr_index(const std::string& attr) const;
};

struct Schema {
  std::vector<RelationSchema> relations;

  int relation_index(const std::string& name) const;
};

struct JoinEdge {
  std::string id;
  uint32_t rel_a = 0, attr_a = 0;
  uint32_t rel_b = 0, attr_b = 0;
};

// Declared joinable column pairs. Templates optionally pre-declare the edge
// sets of workload joins; they gate subset materialization for relations with
// many incident edges.
struct JoinSchema {
  std::vector<JoinEdge> edges;
  std::vector<std::vector<uint32_t>> templates;

  std::vector<uint32_t> incident_edges(uint32_t rel) const;
  std::vector<uint32_t> join_attrs(uint32_t rel) const;
  // edges incident to (rel, attr)
  std::vector<uint32_t> edges_at(uint32_t rel, uint32_t attr) const;
  int edge_index(const std::string& id) const;
};

// A raw typed literal, as parsed from CSV or a query.
using Value = std::variant<int64_t, double, std::string>;

// Sorted distinct raw values mapped onto dense codes 0..size-1,
// order-preserving under the attribute type's ordering.
struct Dictionary {
  AttrType type = AttrType::integer;
  std::vector<int64_t> ints;       // integer / timestamp
  std::vector<double> reals;       // floating
  std::vector<std::string> strings;  // categorical

  size_t size() const;
  // exact code; nullopt when absent
  std::optional<int64_t> code_of(const Value& v) const;
  // first code whose value is >= v (may equal size())
  int64_t first_ge(const Value& v) const;
  // first code whose value is > v (may equal size())
  int64_t first_gt(const Value& v) const;
  Value value_at(int64_t code) const;
};

struct Column {
  Dictionary dict;
  std::vector<int64_t> codes;  // kNullCode marks null
  uint64_t null_count = 0;
};

struct EncodedRelation {
  std::string name;
  uint64_t row_count = 0;
  std::vector<Column> columns;
};

struct Database {
  Schema schema;
  JoinSchema join_schema;
  std::vector<EncodedRelation> relations;
};

struct IngestStats {
  uint64_t files_read = 0;
  uint64_t encode_passes = 0;  // one per encoded column
};

// Parse a typed literal; throws std::runtime_error with context on failure.
Value parse_value(AttrType type, const std::string& text, const std::string& context);
int64_t parse_timestamp_micros(const std::string& text);

Schema load_schema_json(const std::string& path);
JoinSchema load_join_schema_json(const std::string& path, const Schema& schema);
Schema parse_schema_json(const std::string& text);
JoinSchema parse_join_schema_json(const std::string& text, const Schema& schema);

// data_dir must hold one <relation>.csv per schema relation. Join-attribute
// dictionaries are unified across each edge's endpoints so equal raw values
// share codes.
Database ingest(const std::string& data_dir, const Schema& schema,
                const JoinSchema& join_schema, IngestStats* stats = nullptr);

Database ingest_tables(const std::vector<CsvTable>& tables, const Schema& schema,
                       const JoinSchema& join_schema, IngestStats* stats = nullptr);

}  // namespace sspn
