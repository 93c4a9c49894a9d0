#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "sspn/bench.hpp"

using nlohmann::json;
using namespace sspn;

namespace {

uint64_t default_seed() {
  const char* env = std::getenv("SSPN_SEED");
  if (env == nullptr) return 0;
  return std::strtoull(env, nullptr, 10);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void print_qerror_table(const MetricSummary& s, std::ostream& os) {
  os << "q-error   p50=" << s.qerror.p50 << "  p90=" << s.qerror.p90
     << "  p95=" << s.qerror.p95 << "  p99=" << s.qerror.p99 << "  max=" << s.qerror.max
     << "\n";
  os << "mean relative error " << s.mean_relative_error << " over " << s.count << " queries";
  if (s.zero_truth_clamped > 0) os << " (" << s.zero_truth_clamped << " zero truths clamped to 1)";
  os << "\n";
}

int cmd_train(const std::string& data_dir, const std::string& schema_path,
              const std::string& join_path, const std::string& out_path, TrainConfig cfg) {
  auto art = train_from_csv(data_dir, schema_path, join_path, cfg);
  save_model(art.model, out_path);
  std::cerr << "ingest " << art.ingest_ms / 1000.0 << " s, structure "
            << art.timers.structure_ms / 1000.0 << " s, sketching "
            << art.timers.sketch_ms / 1000.0 << " s\n";
  std::cerr << "model written to " << out_path << " (checksum " << model_checksum(out_path)
            << ")\n";
  return 0;
}

int cmd_estimate(const std::string& model_path, const std::string& queries_path,
                 const std::string& out_path, const std::string& variant,
                 const std::string& mode, int threads) {
  Model model = load_model(model_path);
  EstimateOptions opts;
  opts.variant = variant_from_string(variant);
  opts.mode = mode_from_string(mode);
  opts.threads = threads;

  // queries that fail to parse become error records; the run continues
  std::ifstream in(queries_path);
  if (!in) throw std::runtime_error("cannot open " + queries_path);
  std::vector<QuerySpec> queries;
  std::vector<std::pair<size_t, QueryEstimate>> parse_failures;  // position in output
  std::vector<std::string> order;  // ids in input order
  std::string line;
  size_t lineno = 0;
  auto dicts = dict_provider(model);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      queries.push_back(parse_query(line, model.schema, model.join_schema, dicts));
      order.push_back(queries.back().id);
    } catch (const std::exception& e) {
      QueryEstimate bad;
      bad.id = "line" + std::to_string(lineno);
      bad.ok = false;
      bad.error = e.what();
      parse_failures.push_back({order.size(), bad});
      order.push_back(bad.id);
    }
  }
  auto estimated = estimate_workload(model, queries, opts);
  std::vector<QueryEstimate> results;
  size_t next_est = 0, next_bad = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    if (next_bad < parse_failures.size() && parse_failures[next_bad].first == i)
      results.push_back(parse_failures[next_bad++].second);
    else
      results.push_back(estimated[next_est++]);
  }

  auto out = open_out(out_path);
  std::vector<double> times;
  size_t failures = 0;
  for (const auto& r : results) {
    json j;
    j["id"] = r.id;
    if (r.ok) {
      j["estimate"] = r.estimate;
      j["variant"] = variant;
      j["mode"] = mode;
      j["time_ms"] = r.time_ms;
    } else {
      j["error"] = r.error;
      ++failures;
    }
    out << j.dump() << "\n";
    times.push_back(r.time_ms);
  }
  if (!times.empty()) {
    std::cout << "estimation time (ms)  p50=" << percentile_nearest_rank(times, 50)
              << "  p90=" << percentile_nearest_rank(times, 90)
              << "  p95=" << percentile_nearest_rank(times, 95)
              << "  p99=" << percentile_nearest_rank(times, 99)
              << "  max=" << *std::max_element(times.begin(), times.end()) << "\n";
  }
  std::cout << results.size() - failures << "/" << results.size() << " queries estimated\n";
  return 0;
}

int cmd_oracle(const std::string& data_dir, const std::string& schema_path,
               const std::string& join_path, const std::string& queries_path,
               const std::string& out_path, uint64_t budget) {
  Schema schema = load_schema_json(schema_path);
  JoinSchema join_schema = load_join_schema_json(join_path, schema);
  Database db = ingest(data_dir, schema, join_schema);
  auto queries = parse_query_file(queries_path, schema, join_schema, dict_provider(db));

  auto out = open_out(out_path);
  for (const auto& q : queries) {
    json j;
    j["id"] = q.id;
    try {
      auto r = exact_cardinality(db, q, budget);
      if (r.budget_exceeded)
        j["skipped"] = "budget";
      else
        j["truth"] = r.cardinality;
    } catch (const std::exception& e) {
      j["error"] = e.what();
    }
    out << j.dump() << "\n";
  }
  return 0;
}

std::map<std::string, json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<std::string, json> by_id;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line);
    by_id[j.at("id").is_string() ? j.at("id").get<std::string>()
                                 : std::to_string(j.at("id").get<int64_t>())] = j;
  }
  return by_id;
}

int cmd_evaluate(const std::string& estimates_path, const std::string& truths_path,
                 const std::string& out_path) {
  auto estimates = read_jsonl(estimates_path);
  auto truths = read_jsonl(truths_path);

  std::vector<std::pair<double, double>> pairs;
  size_t skipped = 0;
  for (const auto& [id, est] : estimates) {
    auto it = truths.find(id);
    if (it == truths.end()) throw std::runtime_error("no truth for query " + id);
    if (!est.contains("estimate") || !it->second.contains("truth")) {
      ++skipped;
      continue;
    }
    pairs.push_back({est.at("estimate").get<double>(), it->second.at("truth").get<double>()});
  }
  MetricSummary s = evaluate_metrics(pairs);
  print_qerror_table(s, std::cout);
  if (skipped > 0) std::cout << skipped << " queries skipped (missing estimate or truth)\n";

  if (!out_path.empty()) {
    json j;
    j["qerror"] = {{"p50", s.qerror.p50}, {"p90", s.qerror.p90}, {"p95", s.qerror.p95},
                   {"p99", s.qerror.p99}, {"max", s.qerror.max}};
    j["mean_relative_error"] = s.mean_relative_error;
    j["count"] = s.count;
    j["zero_truth_clamped"] = s.zero_truth_clamped;
    auto out = open_out(out_path);
    out << j.dump() << "\n";
  }
  return 0;
}

int cmd_sketch_error(const std::string& model_path, const std::string& baseline_path,
                     const std::string& data_dir, const std::string& queries_path,
                     const std::string& out_path) {
  Model model = load_model(model_path);
  Model baseline;
  if (baseline_path.empty()) {
    // the independence reference: never partition rows
    Schema schema = model.schema;
    JoinSchema join_schema = model.join_schema;
    Database db = ingest(data_dir, schema, join_schema);
    TrainConfig cfg = model.config;
    cfg.cluster_fraction = 1.0;
    baseline = train_model(db, cfg);
  } else {
    baseline = load_model(baseline_path);
  }
  Database db = ingest(data_dir, model.schema, model.join_schema);
  auto queries = parse_query_file(queries_path, model.schema, model.join_schema,
                                  dict_provider(model));
  auto rows = sketch_error(model, baseline, db, queries);

  auto out = open_out(out_path);
  double sum_approx = 0, sum_base = 0;
  size_t n = 0;
  for (const auto& r : rows) {
    json j;
    j["id"] = r.id;
    j["relation"] = r.relation;
    if (r.skipped) {
      j["skipped"] = r.skip_reason;
    } else {
      j["rows"] = r.rows;
      j["l1_approx"] = r.l1_approx;
      j["l1_baseline"] = r.l1_baseline;
      sum_approx += r.l1_approx;
      sum_base += r.l1_baseline;
      ++n;
    }
    out << j.dump() << "\n";
  }
  if (n > 0) {
    std::cout << "mean L1: approx " << sum_approx / static_cast<double>(n) << ", independence "
              << sum_base / static_cast<double>(n) << " over " << n << " selections\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketched sum-product networks for join cardinality estimation"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "learn one SPN per relation from CSV data");
  std::string data_dir, schema_path, join_path, out_path;
  TrainConfig cfg;
  cfg.seed = default_seed();
  std::string cluster_method = "hard-em";
  train->add_option("--data", data_dir, "directory of <relation>.csv files")->required();
  train->add_option("--schema", schema_path, "schema JSON")->required();
  train->add_option("--join-schema", join_path, "join schema JSON")->required();
  train->add_option("--out", out_path, "output model file")->required();
  train->add_option("--seed", cfg.seed, "hash and training seed (env SSPN_SEED)");
  train->add_option("--width", cfg.width, "sketch width, power of two");
  train->add_option("--copies", cfg.copies, "independent estimator copies");
  train->add_option("--rdc-threshold", cfg.rdc_threshold, "independence threshold tau");
  train->add_option("--cluster-fraction", cfg.cluster_fraction, "clustering threshold gamma");
  train->add_option("--cluster-method", cluster_method, "hard-em | k-means");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "estimate a query workload");
  std::string model_path, queries_path, est_out, variant = "fagms-median", mode = "product";
  int threads = 1;
  estimate->add_option("--model", model_path)->required();
  estimate->add_option("--queries", queries_path)->required();
  estimate->add_option("--out", est_out, "estimates JSONL")->required();
  estimate->add_option("--variant", variant, "fagms-median | fagms-max | bound");
  estimate->add_option("--mode", mode, "product | min-product");
  estimate->add_option("--threads", threads, "estimation fan-out");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exact cardinalities by hash-join evaluation");
  std::string o_data, o_schema, o_join, o_queries, o_out;
  uint64_t budget = kOracleDefaultBudget;
  oracle->add_option("--data", o_data)->required();
  oracle->add_option("--schema", o_schema)->required();
  oracle->add_option("--join-schema", o_join)->required();
  oracle->add_option("--queries", o_queries)->required();
  oracle->add_option("--out", o_out, "truths JSONL")->required();
  oracle->add_option("--budget", budget, "work cap before a query is skipped");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "q-error and relative-error metrics");
  std::string e_estimates, e_truths, e_out;
  evaluate->add_option("--estimates", e_estimates)->required();
  evaluate->add_option("--truths", e_truths)->required();
  evaluate->add_option("--out", e_out, "summary JSON");

  // sketch-error
  auto* sketch_err = app.add_subcommand("sketch-error",
                                        "L1 distance between exact and approximated sketches");
  std::string s_model, s_baseline, s_data, s_queries, s_out;
  sketch_err->add_option("--model", s_model)->required();
  sketch_err->add_option("--baseline-model", s_baseline,
                         "independence model (default: retrain with gamma=1)");
  sketch_err->add_option("--data", s_data)->required();
  sketch_err->add_option("--queries", s_queries)->required();
  sketch_err->add_option("--out", s_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      cfg.cluster_method = cluster_method_from_string(cluster_method);
      return cmd_train(data_dir, schema_path, join_path, out_path, cfg);
    }
    if (estimate->parsed())
      return cmd_estimate(model_path, queries_path, est_out, variant, mode, threads);
    if (oracle->parsed()) return cmd_oracle(o_data, o_schema, o_join, o_queries, o_out, budget);
    if (evaluate->parsed()) return cmd_evaluate(e_estimates, e_truths, e_out);
    if (sketch_err->parsed())
      return cmd_sketch_error(s_model, s_baseline, s_data, s_queries, s_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
