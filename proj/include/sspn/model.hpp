#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sspn/infer.hpp"
#include "sspn/spn.hpp"
#include "sspn/table.hpp"

namespace sspn {

inline constexpr uint32_t kModelVersion = 1;

struct RootDegreeSketch {
  std::vector<uint32_t> edges;
  uint32_t copy = 0;
  SketchVector sketch;
};

struct RelationModel {
  std::string name;
  uint64_t row_count = 0;
  std::vector<Dictionary> dicts;  // per attribute
  std::unique_ptr<SpnNode> spn;   // null for an empty relation
  std::vector<RootDegreeSketch> root_degrees;  // sorted by (edges, copy)
};

// Self-contained: estimation needs no access to the raw data.
struct Model {
  TrainConfig config;
  Schema schema;
  JoinSchema join_schema;
  std::vector<RelationModel> relations;
  std::vector<std::vector<EdgeHashAssignment>> edge_assign;  // [edge][copy], derived

  RelationInferContext infer_context(uint32_t rel) const;
  const SketchVector* root_degree(uint32_t rel, const std::vector<uint32_t>& edges,
                                  uint32_t copy) const;
};

Model train_model(const Database& db, const TrainConfig& cfg, TrainTimers* timers = nullptr);

std::string serialize_model(const Model& m);
Model deserialize_model(const std::string& bytes);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);
uint64_t model_checksum(const std::string& path);

DictProvider dict_provider(const Model& m);

// ApproxSketch over one relation's SPN; scalar degenerate case included.
InferResult model_approx(const Model& m, uint32_t rel, const InferenceRequest& request,
                         InferAudit* audit = nullptr);
double selection_cardinality(const Model& m, uint32_t rel, const Predicate& predicate);

struct BoundSketches {
  SketchVector countmin;
  SketchVector degree;  // clamped against the root's exact degree sketch
};
BoundSketches approx_bound_sketches(const Model& m, uint32_t rel,
                                    const std::vector<uint32_t>& edges, uint32_t copy,
                                    const Predicate& predicate, NodeMode mode);

}  // namespace sspn
