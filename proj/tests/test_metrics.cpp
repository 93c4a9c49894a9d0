#include <doctest.h>

#include <stdexcept>

#include "sspn/bench.hpp"
#include "sspn/metrics.hpp"
#include "sspn/oracle.hpp"
#include "support/gen.hpp"

using namespace sspn;

TEST_CASE("q-error basics") {
  CHECK(q_error(10.0, 2.0) == 5.0);
  CHECK(q_error(2.0, 10.0) == 5.0);
  CHECK(q_error(7.0, 7.0) == 1.0);
  CHECK_THROWS_AS(q_error(0.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(q_error(3.0, 0.0), std::invalid_argument);
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<double> v = {5, 1, 4, 2, 3};
  CHECK(percentile_nearest_rank(v, 50) == 3.0);
  CHECK(percentile_nearest_rank(v, 90) == 5.0);
  CHECK(percentile_nearest_rank(v, 100) == 5.0);
  CHECK(percentile_nearest_rank(v, 1) == 1.0);
  CHECK_THROWS_AS(percentile_nearest_rank({}, 50), std::invalid_argument);
}

TEST_CASE("evaluate_metrics") {
  SUBCASE("perfect estimates give q-error one everywhere") {
    std::vector<std::pair<double, double>> pairs = {{3, 3}, {10, 10}, {7, 7}};
    auto s = evaluate_metrics(pairs);
    CHECK(s.qerror.p50 == 1.0);
    CHECK(s.qerror.p99 == 1.0);
    CHECK(s.qerror.max == 1.0);
    CHECK(s.mean_relative_error == 0.0);
    CHECK(s.zero_truth_clamped == 0);
  }
  SUBCASE("zero truths are clamped and counted") {
    std::vector<std::pair<double, double>> pairs = {{2, 0}, {4, 4}};
    auto s = evaluate_metrics(pairs);
    CHECK(s.zero_truth_clamped == 1);
    CHECK(s.qerror.max == 2.0);
  }
  SUBCASE("relative errors are signed") {
    std::vector<std::pair<double, double>> pairs = {{5, 10}, {20, 10}};
    auto s = evaluate_metrics(pairs);
    CHECK(s.mean_relative_error == doctest::Approx(0.25));  // (-0.5 + 1.0) / 2
  }
}

TEST_CASE("oracle cross-checks") {
  auto ax = testgen::uniform_codes(100, 12, 1);
  auto bx = testgen::uniform_codes(100, 12, 2);
  auto by = testgen::uniform_codes(100, 9, 3);
  auto cy = testgen::uniform_codes(100, 9, 4);
  Schema schema = testgen::make_int_schema({{"A", {"x"}}, {"B", {"x", "y"}}, {"C", {"y"}}});
  JoinSchema js = testgen::make_join_schema(schema, {{"ab", "A.x", "B.x"}, {"bc", "B.y", "C.y"}});
  std::vector<CsvTable> tables = {testgen::csv_from_codes({"x"}, {ax}),
                                  testgen::csv_from_codes({"x", "y"}, {bx, by}),
                                  testgen::csv_from_codes({"y"}, {cy})};
  Database db = ingest_tables(tables, schema, js);

  SUBCASE("three-relation chain matches the nested-loop recomputation") {
    auto q = parse_query(
        R"({"id":"q","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"},
            {"alias":"c","name":"C"}],"joins":["a.x=b.x","b.y=c.y"],
            "filters":[{"column":"a.x","op":"<=","value":6}]})",
        schema, js, dict_provider(db));
    auto fast = exact_cardinality(db, q);
    CHECK(!fast.budget_exceeded);
    CHECK(fast.cardinality == testgen::nested_loop_join(db, q));
  }
  SUBCASE("empty selections produce zero") {
    auto q = parse_query(
        R"({"id":"q","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"}],
            "joins":["a.x=b.x"],"filters":[{"column":"a.x","op":"=","value":99999}]})",
        schema, js, dict_provider(db));
    CHECK(exact_cardinality(db, q).cardinality == 0.0);
  }
  SUBCASE("the budget produces a skip marker instead of an answer") {
    auto q = parse_query(
        R"({"id":"q","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"},
            {"alias":"c","name":"C"}],"joins":["a.x=b.x","b.y=c.y"]})",
        schema, js, dict_provider(db));
    auto r = exact_cardinality(db, q, /*budget=*/10);
    CHECK(r.budget_exceeded);
  }
  SUBCASE("null join keys never match") {
    std::vector<CsvTable> with_nulls = {parse_csv("x\n1\n\n", "A"),
                                        parse_csv("x,y\n1,2\n,2\n", "B"),
                                        parse_csv("y\n2\n", "C")};
    Database db2 = ingest_tables(with_nulls, schema, js);
    auto q = parse_query(
        R"({"id":"q","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"},
            {"alias":"c","name":"C"}],"joins":["a.x=b.x","b.y=c.y"]})",
        schema, js, dict_provider(db2));
    auto r = exact_cardinality(db2, q);
    CHECK(r.cardinality == 1.0);  // only the fully non-null tuple survives
    CHECK(r.cardinality == testgen::nested_loop_join(db2, q));
  }
}

TEST_CASE("estimate_workload keeps input order and isolates failures") {
  auto x = testgen::uniform_codes(200, 16, 5);
  Schema schema = testgen::make_int_schema({{"A", {"x"}}, {"B", {"x"}}});
  JoinSchema js = testgen::make_join_schema(schema, {{"e0", "A.x", "B.x"}});
  std::vector<CsvTable> tables = {testgen::csv_from_codes({"x"}, {x}),
                                  testgen::csv_from_codes({"x"}, {x})};
  Database db = ingest_tables(tables, schema, js);
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.width = 64;
  cfg.copies = 3;
  Model m = train_model(db, cfg);

  std::vector<QuerySpec> queries;
  for (int i = 0; i < 6; ++i) {
    queries.push_back(parse_query(
        R"({"id":"q)" + std::to_string(i) +
            R"(","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"}],
            "joins":["a.x=b.x"]})",
        schema, js, dict_provider(db)));
  }
  EstimateOptions opts;
  opts.threads = 2;
  auto results = estimate_workload(m, queries, opts);
  REQUIRE(results.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(results[i].id == "q" + std::to_string(i));
    CHECK(results[i].ok);
    CHECK(results[i].estimate == results[0].estimate);  // identical queries
    CHECK(results[i].estimate >= 1.0);
    CHECK(results[i].time_ms >= 0.0);
  }
}

TEST_CASE("min-product bound estimates dominate product-mode estimates per query") {
  auto [x, f] = testgen::correlated_codes(1200, 32, 0.8, 44);
  auto bx = testgen::uniform_codes(900, 32, 45);
  Schema schema = testgen::make_int_schema({{"A", {"x", "f"}}, {"B", {"x"}}});
  JoinSchema js = testgen::make_join_schema(schema, {{"e0", "A.x", "B.x"}});
  std::vector<CsvTable> tables = {testgen::csv_from_codes({"x", "f"}, {x, f}),
                                  testgen::csv_from_codes({"x"}, {bx})};
  Database db = ingest_tables(tables, schema, js);
  TrainConfig cfg;
  cfg.seed = 8;
  cfg.width = 128;
  cfg.copies = 3;
  cfg.cluster_fraction = 0.2;
  Model m = train_model(db, cfg);

  for (int64_t lo = 0; lo < 30; lo += 4) {
    auto q = parse_query(
        R"({"id":"q","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"}],
            "joins":["a.x=b.x"],"filters":[{"column":"a.f","op":"between","lo":)" +
            std::to_string(lo) + ",\"hi\":" + std::to_string(lo + 5) + "}]}",
        schema, js, dict_provider(db));
    EstimateOptions opts;
    opts.variant = Variant::bound;
    opts.mode = NodeMode::product;
    auto prod = estimate_query(m, q, opts);
    opts.mode = NodeMode::min_product;
    auto minp = estimate_query(m, q, opts);
    REQUIRE(prod.ok);
    REQUIRE(minp.ok);
    CHECK(minp.estimate >= prod.estimate - 1e-9);
  }
}

TEST_CASE("sketch-error rows skip unfiltered selections") {
  auto [x, f] = testgen::correlated_codes(800, 24, 0.8, 6);
  Schema schema = testgen::make_int_schema({{"A", {"x", "f"}}, {"B", {"x"}}});
  JoinSchema js = testgen::make_join_schema(schema, {{"e0", "A.x", "B.x"}});
  std::vector<CsvTable> tables = {testgen::csv_from_codes({"x", "f"}, {x, f}),
                                  testgen::csv_from_codes({"x"}, {testgen::uniform_codes(60, 24, 7)})};
  Database db = ingest_tables(tables, schema, js);
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.width = 128;
  cfg.copies = 1;
  cfg.cluster_fraction = 0.25;
  Model fine = train_model(db, cfg);
  TrainConfig icfg = cfg;
  icfg.cluster_fraction = 1.0;
  Model indep = train_model(db, icfg);

  std::vector<QuerySpec> queries = {parse_query(
      R"({"id":"q0","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"}],
          "joins":["a.x=b.x"],"filters":[{"column":"a.f","op":"between","lo":3,"hi":9}]})",
      schema, js, dict_provider(db))};
  auto rows = sketch_error(fine, indep, db, queries);
  REQUIRE(rows.size() == 2);
  CHECK(!rows[0].skipped);     // filtered relation A
  CHECK(rows[1].skipped);      // unfiltered relation B
  CHECK(rows[1].skip_reason == "no-filter");
  CHECK(rows[0].l1_approx >= 0.0);
  CHECK(rows[0].l1_baseline >= 0.0);

  SUBCASE("a false predicate makes the exact sketch zero") {
    auto q = parse_query(
        R"({"id":"q1","relations":[{"alias":"a","name":"A"},{"alias":"b","name":"B"}],
            "joins":["a.x=b.x"],"filters":[{"column":"a.f","op":"=","value":123456}]})",
        schema, js, dict_provider(db));
    auto rows2 = sketch_error(fine, indep, db, {q});
    REQUIRE(!rows2[0].skipped);
    CHECK(rows2[0].rows == 0);
    // exact sketch is zero, so the L1 equals the approximation's own mass
    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::countmin;
    req.predicate = &q.relations[0].predicate;
    double mass = model_approx(fine, 0, req).sketch.total();
    CHECK(rows2[0].l1_approx == doctest::Approx(mass).epsilon(1e-9));
  }
}
