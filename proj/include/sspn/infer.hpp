#pragma once

#include <cstdint>
#include <vector>

#include "sspn/estimator.hpp"
#include "sspn/query.hpp"
#include "sspn/spn.hpp"

namespace sspn {

struct DyadicInterval {
  int64_t lo = 0;
  int64_t hi = 0;
  uint32_t level = 0;  // length == 1 << level
};

// Canonical disjoint cover of [lo, hi] by dyadic intervals, at most two per
// level.
std::vector<DyadicInterval> dyadic_cover(int64_t lo, int64_t hi);

struct InferenceRequest {
  std::vector<uint32_t> edges;  // sorted subset; empty -> pure selectivity
  SketchKind kind = SketchKind::agms;
  uint32_t copy = 0;
  NodeMode mode = NodeMode::product;
  const Predicate* predicate = nullptr;  // nullptr means no conditions
};

struct InferResult {
  bool is_sketch = false;
  double scalar = 1.0;
  SketchVector sketch;
};

// (product of child scalars, min of child scalars) recorded at every product
// node visited
struct InferAudit {
  std::vector<std::pair<double, double>> product_scalars;
};

struct RelationInferContext {
  const Schema* schema = nullptr;
  const JoinSchema* join_schema = nullptr;
  const std::vector<std::vector<EdgeHashAssignment>>* edge_assign = nullptr;
  uint64_t master_seed = 0;
  uint32_t rel = 0;
};

double leaf_selectivity(const SelectivityLeaf& leaf, const std::vector<Condition>* conditions,
                        const RelationInferContext& ctx);

InferResult approx_sketch(const RelationInferContext& ctx, const SpnNode& node,
                          const InferenceRequest& request, InferAudit* audit = nullptr);

}  // namespace sspn
