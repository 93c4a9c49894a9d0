#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sspn/estimator.hpp"
#include "sspn/table.hpp"

namespace sspn {

// One disjunctive condition over an attribute's dictionary codes.
struct Condition {
  enum class Op : uint8_t { eq = 0, range = 1, set = 2 };
  Op op = Op::eq;
  int64_t lo = 0, hi = 0;       // range, inclusive
  std::vector<int64_t> codes;   // eq (single) / set (sorted); empty set matches nothing
};

// Conditions combine conjunctively across attributes and disjunctively
// within one attribute.
struct Predicate {
  std::map<uint32_t, std::vector<Condition>> by_attr;

  bool empty() const { return by_attr.empty(); }
  bool matches(uint32_t attr, int64_t code) const;  // no conditions -> true
};

// Merge overlapping ranges and duplicate points so disjunctive estimation
// never double counts.
std::vector<Condition> canonicalize_conditions(std::vector<Condition> conditions);

struct QueryRelation {
  std::string alias;
  uint32_t rel = 0;
  Predicate predicate;
};

struct QueryJoin {
  uint32_t left_vertex = 0;   // endpoint a of the edge
  uint32_t right_vertex = 0;  // endpoint b
  uint32_t edge = 0;
};

struct QuerySpec {
  std::string id;
  std::vector<QueryRelation> relations;
  std::vector<QueryJoin> joins;
  std::optional<double> truth;

  JoinGraph join_graph() const;
};

// Per-(relation, attribute) dictionary access; both Database and Model
// provide one.
struct DictProvider {
  const void* ctx = nullptr;
  const Dictionary& (*get)(const void* ctx, uint32_t rel, uint32_t attr) = nullptr;

  const Dictionary& operator()(uint32_t rel, uint32_t attr) const { return get(ctx, rel, attr); }
};

DictProvider dict_provider(const Database& db);

QuerySpec parse_query(const std::string& json_line, const Schema& schema,
                      const JoinSchema& join_schema, const DictProvider& dicts);

std::vector<QuerySpec> parse_query_file(const std::string& path, const Schema& schema,
                                        const JoinSchema& join_schema, const DictProvider& dicts);

}  // namespace sspn
