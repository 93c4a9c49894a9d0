#include "sspn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <stdexcept>

namespace sspn {

Variant variant_from_string(const std::string& s) {
  if (s == "fagms-median") return Variant::fagms_median;
  if (s == "fagms-max") return Variant::fagms_max;
  if (s == "bound") return Variant::bound;
  throw std::runtime_error("unknown variant: " + s);
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::fagms_median: return "fagms-median";
    case Variant::fagms_max: return "fagms-max";
    case Variant::bound: return "bound";
  }
  return "?";
}

NodeMode mode_from_string(const std::string& s) {
  if (s == "product") return NodeMode::product;
  if (s == "min-product") return NodeMode::min_product;
  throw std::runtime_error("unknown mode: " + s);
}

const char* mode_name(NodeMode m) {
  return m == NodeMode::product ? "product" : "min-product";
}

namespace {

struct VertexPlan {
  std::vector<uint32_t> edges;        // sorted incident edge subset
  std::vector<uint32_t> flip_edges;   // self-edges bound at endpoint b
};

std::vector<VertexPlan> plan_vertices(const Model& model, const QuerySpec& query) {
  std::vector<VertexPlan> plans(query.relations.size());
  for (const auto& join : query.joins) {
    const JoinEdge& edge = model.join_schema.edges[join.edge];
    plans[join.left_vertex].edges.push_back(join.edge);
    plans[join.right_vertex].edges.push_back(join.edge);
    if (edge.rel_a == edge.rel_b && edge.attr_a == edge.attr_b)
      plans[join.right_vertex].flip_edges.push_back(join.edge);
  }
  for (auto& p : plans) {
    std::sort(p.edges.begin(), p.edges.end());
    if (!p.flip_edges.empty() && p.edges.size() > 1)
      throw std::runtime_error(
          "self-join vertices with multiple incident edges are not supported");
  }
  return plans;
}

SketchVector maybe_flip(SketchVector s, const VertexPlan& plan) {
  return plan.flip_edges.empty() ? std::move(s) : reverse_orientation(s);
}

double run_estimators(const Model& model, const QuerySpec& query, const EstimateOptions& opts,
                      InferAudit* audit) {
  const JoinGraph graph = query.join_graph();
  validate_join_graph(graph);
  const auto plans = plan_vertices(model, query);
  const uint32_t copies = model.config.copies;

  std::vector<double> per_copy;
  per_copy.reserve(copies);
  for (uint32_t copy = 0; copy < copies; ++copy) {
    if (opts.variant == Variant::bound) {
      std::vector<SketchVector> cm(plans.size()), deg(plans.size());
      std::vector<const SketchVector*> cmp(plans.size()), degp(plans.size());
      for (size_t v = 0; v < plans.size(); ++v) {
        BoundSketches bs =
            approx_bound_sketches(model, query.relations[v].rel, plans[v].edges, copy,
                                  query.relations[v].predicate, opts.mode);
        cm[v] = maybe_flip(std::move(bs.countmin), plans[v]);
        deg[v] = maybe_flip(std::move(bs.degree), plans[v]);
        cmp[v] = &cm[v];
        degp[v] = &deg[v];
      }
      per_copy.push_back(bound_estimate(cmp, degp, graph));
    } else {
      std::vector<SketchVector> sk(plans.size());
      std::vector<const SketchVector*> skp(plans.size());
      for (size_t v = 0; v < plans.size(); ++v) {
        InferenceRequest req;
        req.edges = plans[v].edges;
        req.kind = SketchKind::agms;
        req.copy = copy;
        req.mode = opts.mode;
        req.predicate = &query.relations[v].predicate;
        InferResult r = model_approx(model, query.relations[v].rel, req, audit);
        if (!r.is_sketch) throw std::logic_error("expected a sketch for a join vertex");
        sk[v] = maybe_flip(std::move(r.sketch), plans[v]);
        skp[v] = &sk[v];
      }
      per_copy.push_back(contract(skp, graph));
    }
  }
  return combine_estimates(per_copy, opts.variant);
}

}  // namespace

QueryEstimate estimate_query(const Model& model, const QuerySpec& query,
                             const EstimateOptions& opts, InferAudit* audit) {
  QueryEstimate out;
  out.id = query.id;
  auto t0 = std::chrono::steady_clock::now();
  try {
    if (query.relations.size() == 1 && query.joins.empty()) {
      double card = selection_cardinality(model, query.relations[0].rel,
                                          query.relations[0].predicate);
      out.estimate = std::max(card, 1.0);
    } else {
      out.estimate = run_estimators(model, query, opts, audit);
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<QueryEstimate> estimate_workload(const Model& model,
                                             const std::vector<QuerySpec>& queries,
                                             const EstimateOptions& opts) {
  std::vector<QueryEstimate> out(queries.size());
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (size_t i = 0; i < queries.size(); ++i) out[i] = estimate_query(model, queries[i], opts);
    return out;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      out[i] = estimate_query(model, queries[i], opts);
    }
  };
  std::vector<std::future<void>> futures;
  for (int t = 0; t < threads; ++t) futures.push_back(std::async(std::launch::async, worker));
  for (auto& f : futures) f.get();
  return out;
}

std::vector<SketchErrorRow> sketch_error(const Model& model, const Model& baseline,
                                         const Database& db,
                                         const std::vector<QuerySpec>& queries) {
  if (model.config.seed != baseline.config.seed ||
      model.config.width != baseline.config.width)
    throw std::runtime_error("baseline model must share the seed and width");

  std::vector<SketchErrorRow> out;
  for (const auto& query : queries) {
    const JoinGraph graph = query.join_graph();
    for (size_t v = 0; v < query.relations.size(); ++v) {
      SketchErrorRow row;
      row.id = query.id;
      row.relation = query.relations[v].alias;
      const auto& qr = query.relations[v];
      if (qr.predicate.empty()) {
        row.skipped = true;
        row.skip_reason = "no-filter";  // its approximation is exact
        out.push_back(std::move(row));
        continue;
      }
      auto edges = graph.incident_edges(static_cast<uint32_t>(v));
      if (edges.empty()) {
        row.skipped = true;
        row.skip_reason = "no-join";
        out.push_back(std::move(row));
        continue;
      }

      const auto& rel = db.relations[qr.rel];
      auto rows = filter_rows(rel, qr.predicate);
      row.rows = rows.size();

      std::vector<std::span<const int64_t>> edge_cols;
      std::vector<int8_t> orientations;
      std::vector<EdgeHashAssignment> assigns;
      for (uint32_t e : edges) {
        const JoinEdge& edge = db.join_schema.edges[e];
        edge_cols.push_back(rel.columns[edge_attr_at(edge, qr.rel)].codes);
        orientations.push_back(
            edge_orientation_at(db.schema, edge, relation_is_endpoint_a(edge, qr.rel)));
        assigns.push_back(model.edge_assign[e][0]);
      }
      SketchVector exact = build_countmin(edge_cols, rows, assigns, orientations,
                                          model.config.width);

      InferenceRequest req;
      req.edges = edges;
      req.kind = SketchKind::countmin;
      req.copy = 0;
      req.predicate = &qr.predicate;
      SketchVector approx = model_approx(model, qr.rel, req).sketch;
      SketchVector indep = model_approx(baseline, qr.rel, req).sketch;

      for (uint32_t i = 0; i < model.config.width; ++i) {
        row.l1_approx += std::abs(exact.counters[i] - approx.counters[i]);
        row.l1_baseline += std::abs(exact.counters[i] - indep.counters[i]);
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

TrainArtifacts train_from_csv(const std::string& data_dir, const std::string& schema_path,
                              const std::string& join_schema_path, const TrainConfig& cfg) {
  TrainArtifacts art;
  auto t0 = std::chrono::steady_clock::now();
  Schema schema = load_schema_json(schema_path);
  JoinSchema join_schema = load_join_schema_json(join_schema_path, schema);
  Database db = ingest(data_dir, schema, join_schema, &art.ingest_stats);
  art.ingest_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  art.model = train_model(db, cfg, &art.timers);
  return art;
}

}  // namespace sspn
