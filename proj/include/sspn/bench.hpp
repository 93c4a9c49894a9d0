#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sspn/metrics.hpp"
#include "sspn/model.hpp"
#include "sspn/oracle.hpp"

namespace sspn {

Variant variant_from_string(const std::string& s);
const char* variant_name(Variant v);
NodeMode mode_from_string(const std::string& s);
const char* mode_name(NodeMode m);

struct EstimateOptions {
  Variant variant = Variant::fagms_median;
  NodeMode mode = NodeMode::product;
  int threads = 1;
};

struct QueryEstimate {
  std::string id;
  bool ok = false;
  double estimate = 0.0;  // >= 1 when ok
  double time_ms = 0.0;
  std::string error;
};

// One query end to end: SPN sketch approximation per vertex and copy, then
// contraction and the variant's combiner. Single-relation queries degrade to
// selection cardinality.
QueryEstimate estimate_query(const Model& model, const QuerySpec& query,
                             const EstimateOptions& opts, InferAudit* audit = nullptr);

std::vector<QueryEstimate> estimate_workload(const Model& model,
                                             const std::vector<QuerySpec>& queries,
                                             const EstimateOptions& opts);

struct SketchErrorRow {
  std::string id;
  std::string relation;
  bool skipped = false;
  std::string skip_reason;
  double l1_approx = 0.0;
  double l1_baseline = 0.0;
  uint64_t rows = 0;
};

// Per (query, filtered relation): L1 distance between the exact Count-Min
// sketch of the selection and (a) the model's approximation, (b) the
// independence baseline's. Models must share the seed so sketches align.
std::vector<SketchErrorRow> sketch_error(const Model& model, const Model& baseline,
                                         const Database& db,
                                         const std::vector<QuerySpec>& queries);

struct TrainArtifacts {
  Model model;
  TrainTimers timers;
  IngestStats ingest_stats;
  double ingest_ms = 0.0;
};

TrainArtifacts train_from_csv(const std::string& data_dir, const std::string& schema_path,
                              const std::string& join_schema_path, const TrainConfig& cfg);

}  // namespace sspn
