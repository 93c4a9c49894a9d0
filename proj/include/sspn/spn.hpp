#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sspn/cluster.hpp"
#include "sspn/rdc.hpp"
#include "sspn/sketch.hpp"
#include "sspn/table.hpp"

namespace sspn {

struct TrainConfig {
  double rdc_threshold = 0.0;       // tau: rdc > tau marks dependence
  double cluster_fraction = 0.1;    // gamma: partitions at/below gamma*|R| force leaves
  ClusterMethod cluster_method = ClusterMethod::hard_em;
  uint32_t width = 1u << 17;
  uint32_t copies = 5;
  uint64_t seed = 0;
  uint32_t rdc_features = kRdcDefaultFeatures;
  double rdc_scale = kRdcDefaultScale;
};

inline constexpr uint32_t kSelectivityMaxWidth = 2048;
inline constexpr uint32_t kDigestMaxKeys = 4096;
inline constexpr size_t kRdcSampleCap = 10000;
inline constexpr size_t kSubsetLatticeMaxEdges = 4;

// Single-row Count-Min over one dyadic level of an attribute's code domain.
struct LevelSketch {
  uint32_t width = 0;
  std::vector<double> counters;
};

struct SelectivityLeaf {
  uint32_t attr = 0;
  uint64_t row_count = 0;
  uint64_t null_count = 0;
  uint64_t distinct_count = 0;
  uint64_t domain_size = 0;  // dictionary size at build time
  std::vector<LevelSketch> levels;  // level l built over code >> l
};

struct SketchLeafEntry {
  std::vector<uint32_t> edges;  // sorted subset of the relation's incident edges
  uint32_t copy = 0;
  SketchVector agms;
  SketchVector countmin;
  SketchVector degree;
};

// key -> count over the leaf's scope attributes (nulls kept as kNullCode),
// sorted by key; retained while distinct keys <= kDigestMaxKeys
using LeafDigest = std::vector<std::pair<std::vector<int64_t>, int64_t>>;

struct SketchLeaf {
  std::vector<uint32_t> attrs;  // sorted; join attributes only
  uint64_t row_count = 0;
  std::vector<SketchLeafEntry> entries;  // sorted by (edges, copy)
  bool has_digest = false;
  LeafDigest digest;
  std::vector<SelectivityLeaf> attr_selectivity;  // aligned with attrs
};

struct SpnNode {
  enum class Type : uint8_t { sum = 0, product = 1, sketch_leaf = 2, selectivity_leaf = 3 };
  Type type = Type::selectivity_leaf;
  std::vector<uint32_t> scope;  // sorted attribute indices
  uint64_t row_count = 0;
  std::vector<std::unique_ptr<SpnNode>> children;
  std::vector<uint64_t> child_rows;  // sum nodes: |P_i|; weights are child_rows/row_count
  SketchLeaf sketch;
  SelectivityLeaf sel;
};

struct TrainTimers {
  double structure_ms = 0.0;
  double sketch_ms = 0.0;
};

// hash family behind one dyadic level of a selectivity leaf
HashFamily selectivity_family(uint64_t master_seed, uint32_t rel, uint32_t attr, uint32_t level,
                              uint32_t width);

// +1 at the lexicographically smaller (relation, attribute) endpoint
int8_t edge_orientation_at(const Schema& schema, const JoinEdge& edge, bool endpoint_a);
bool relation_is_endpoint_a(const JoinEdge& edge, uint32_t rel);
// the relation's attribute incident to the edge
uint32_t edge_attr_at(const JoinEdge& edge, uint32_t rel);

// Edge subsets materialized per relation: the full non-empty lattice while
// the relation has at most kSubsetLatticeMaxEdges incident edges, otherwise
// singletons plus template-induced subsets.
std::vector<std::vector<uint32_t>> relation_edge_subsets(const JoinSchema& join_schema,
                                                         uint32_t rel);

struct TrainContext {
  const Schema* schema = nullptr;
  const JoinSchema* join_schema = nullptr;
  const EncodedRelation* rel = nullptr;
  uint32_t rel_idx = 0;
  const TrainConfig* cfg = nullptr;
  const std::vector<std::vector<EdgeHashAssignment>>* edge_assign = nullptr;  // [edge][copy]
  std::vector<std::vector<uint32_t>> subsets;
  std::vector<uint32_t> join_attrs;  // sorted
  uint64_t total_rows = 0;
  TrainTimers* timers = nullptr;
};

TrainContext make_train_context(const Schema& schema, const JoinSchema& join_schema,
                                const Database& db, uint32_t rel_idx, const TrainConfig& cfg,
                                const std::vector<std::vector<EdgeHashAssignment>>& edge_assign,
                                TrainTimers* timers);

std::unique_ptr<SpnNode> train_spn(const TrainContext& ctx, std::vector<uint32_t> rows,
                                   std::vector<uint32_t> scope, uint64_t node_seed);

SketchLeaf build_sketch_leaf(const TrainContext& ctx, std::span<const uint32_t> rows,
                             std::vector<uint32_t> attrs);

SelectivityLeaf build_selectivity_leaf(std::span<const int64_t> codes,
                                       std::span<const uint32_t> rows, uint64_t domain_size,
                                       uint64_t master_seed, uint32_t rel, uint32_t attr,
                                       uint32_t width);

// connected components of the graph with edges where rdc > tau; components
// containing join attributes are merged so join attributes stay together
std::vector<std::vector<uint32_t>> dependency_components(
    const std::vector<std::vector<double>>& rdc_matrix, std::span<const uint32_t> scope,
    std::span<const uint32_t> join_attrs, double tau);

}  // namespace sspn
