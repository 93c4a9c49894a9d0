#pragma once

#include <cstdint>
#include <vector>

#include "sspn/query.hpp"
#include "sspn/table.hpp"

namespace sspn {

inline constexpr uint64_t kOracleDefaultBudget = 50'000'000;

std::vector<uint32_t> filter_rows(const EncodedRelation& rel, const Predicate& predicate);

struct OracleResult {
  bool budget_exceeded = false;
  double cardinality = 0.0;
};

// Exact join cardinality: filters applied first, then hash joins along the
// query's join tree with per-key counting. The budget caps processed rows
// plus intermediate key-group counts.
OracleResult exact_cardinality(const Database& db, const QuerySpec& query,
                               uint64_t budget = kOracleDefaultBudget);

}  // namespace sspn
