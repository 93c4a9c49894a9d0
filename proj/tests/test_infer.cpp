#include <doctest.h>

#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sspn/bench.hpp"
#include "sspn/infer.hpp"
#include "sspn/model.hpp"
#include "support/gen.hpp"

using namespace sspn;

namespace {

struct Fixture {
  Schema schema;
  JoinSchema js;
  Database db;
  Model model;

  // A(x join, f filter) with strong x-f correlation; B(x) partner
  explicit Fixture(size_t n = 3000, double rho = 0.85, uint64_t seed = 5, double gamma = 0.2,
                   uint32_t width = 256, uint32_t copies = 2) {
    auto [x, f] = testgen::correlated_codes(n, 48, rho, seed);
    auto bx = testgen::uniform_codes(300, 48, seed + 9);
    schema = testgen::make_int_schema({{"A", {"x", "f"}}, {"B", {"x"}}});
    js = testgen::make_join_schema(schema, {{"e0", "A.x", "B.x"}});
    std::vector<CsvTable> tables = {testgen::csv_from_codes({"x", "f"}, {x, f}),
                                    testgen::csv_from_codes({"x"}, {bx})};
    db = ingest_tables(tables, schema, js);
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.cluster_fraction = gamma;
    cfg.width = width;
    cfg.copies = copies;
    model = train_model(db, cfg);
  }

  SketchVector exact_selection_sketch(SketchKind kind, const Predicate& pred,
                                      uint32_t copy = 0) const {
    auto rows = filter_rows(db.relations[0], pred);
    std::vector<std::span<const int64_t>> cols = {db.relations[0].columns[0].codes};
    std::vector<EdgeHashAssignment> assigns = {model.edge_assign[0][copy]};
    std::vector<int8_t> orient = {
        edge_orientation_at(schema, js.edges[0], relation_is_endpoint_a(js.edges[0], 0))};
    switch (kind) {
      case SketchKind::agms: return build_agms(cols, rows, assigns, orient, model.config.width);
      case SketchKind::countmin:
        return build_countmin(cols, rows, assigns, orient, model.config.width);
      case SketchKind::degree:
        return build_degree(build_frequency_table(cols, rows), assigns, orient,
                            model.config.width);
    }
    throw std::logic_error("kind");
  }

  Predicate range_on_f(int64_t lo, int64_t hi) const {
    Predicate p;
    Condition c;
    c.op = Condition::Op::range;
    c.lo = lo;
    c.hi = hi;
    p.by_attr[1] = canonicalize_conditions({c});
    return p;
  }
};

}  // namespace

TEST_CASE("dyadic cover") {
  SUBCASE("the worked example") {
    auto cover = dyadic_cover(3, 9);
    REQUIRE(cover.size() == 3);
    CHECK(cover[0].lo == 3);
    CHECK(cover[0].hi == 3);
    CHECK(cover[1].lo == 4);
    CHECK(cover[1].hi == 7);
    CHECK(cover[2].lo == 8);
    CHECK(cover[2].hi == 9);
  }
  SUBCASE("exhaustive: disjoint, covering, at most 2L intervals") {
    for (uint32_t L = 1; L <= 8; ++L) {
      const int64_t domain = int64_t{1} << L;
      for (int64_t lo = 0; lo < domain; ++lo) {
        for (int64_t hi = lo; hi < domain; ++hi) {
          auto cover = dyadic_cover(lo, hi);
          CHECK(cover.size() <= 2 * L);
          int64_t expect = lo;
          for (const auto& iv : cover) {
            CHECK(iv.lo == expect);  // contiguous and disjoint
            CHECK((iv.lo % (int64_t{1} << iv.level)) == 0);
            CHECK(iv.hi - iv.lo + 1 == int64_t{1} << iv.level);
            expect = iv.hi + 1;
          }
          CHECK(expect == hi + 1);
        }
      }
    }
  }
  SUBCASE("empty and degenerate ranges") {
    CHECK(dyadic_cover(5, 4).empty());
    auto one = dyadic_cover(6, 6);
    REQUIRE(one.size() == 1);
    CHECK(one[0].level == 0);
  }
}

TEST_CASE("leaf_selectivity answers point, range, and set conditions") {
  auto codes = testgen::zipf_codes(2000, 50, 1.1, 3);
  std::vector<uint32_t> rows(2000);
  std::iota(rows.begin(), rows.end(), 0);
  auto leaf = build_selectivity_leaf(codes, rows, 50, 21, 0, 1, 2048);
  RelationInferContext ctx;
  ctx.master_seed = 21;
  ctx.rel = 0;

  std::vector<double> truth(50, 0.0);
  for (int64_t c : codes) truth[c] += 1.0;

  SUBCASE("no condition marginalizes to one") {
    CHECK(leaf_selectivity(leaf, nullptr, ctx) == 1.0);
    std::vector<Condition> none;
    CHECK(leaf_selectivity(leaf, &none, ctx) == 1.0);
  }
  SUBCASE("full-domain range clamps to one") {
    Condition c;
    c.op = Condition::Op::range;
    c.lo = 0;
    c.hi = 49;
    std::vector<Condition> conds = {c};
    CHECK(leaf_selectivity(leaf, &conds, ctx) == 1.0);
  }
  SUBCASE("equality never underestimates") {
    for (int64_t code = 0; code < 50; ++code) {
      Condition c;
      c.op = Condition::Op::eq;
      c.codes = {code};
      std::vector<Condition> conds = {c};
      double p = leaf_selectivity(leaf, &conds, ctx);
      CHECK(p * 2000.0 >= truth[code] - 1e-9);
      CHECK(p <= 1.0);
    }
  }
  SUBCASE("ranges never underestimate") {
    for (int64_t lo = 0; lo < 50; lo += 7) {
      for (int64_t hi = lo; hi < 50; hi += 5) {
        Condition c;
        c.op = Condition::Op::range;
        c.lo = lo;
        c.hi = hi;
        std::vector<Condition> conds = {c};
        double expect = 0.0;
        for (int64_t v = lo; v <= hi; ++v) expect += truth[v];
        CHECK(leaf_selectivity(leaf, &conds, ctx) * 2000.0 >= expect - 1e-9);
      }
    }
  }
  SUBCASE("codes outside the dictionary contribute nothing") {
    Condition c;
    c.op = Condition::Op::set;
    c.codes = {-3, 777};
    std::vector<Condition> conds = {c};
    CHECK(leaf_selectivity(leaf, &conds, ctx) == 0.0);
  }
}

TEST_CASE("empty predicate reproduces the exact relation sketches") {
  Fixture f;
  Predicate empty;
  for (auto kind : {SketchKind::agms, SketchKind::countmin}) {
    for (uint32_t copy = 0; copy < 2; ++copy) {
      InferenceRequest req;
      req.edges = {0};
      req.kind = kind;
      req.copy = copy;
      req.predicate = &empty;
      auto approx = model_approx(f.model, 0, req);
      REQUIRE(approx.is_sketch);
      auto exact = f.exact_selection_sketch(kind, empty, copy);
      CHECK(approx.sketch.counters == exact.counters);  // value-exact
    }
  }
  SUBCASE("bound pair: countmin exact, degree clamp is the identity") {
    auto bs = approx_bound_sketches(f.model, 0, {0}, 0, empty, NodeMode::product);
    auto exact_cm = f.exact_selection_sketch(SketchKind::countmin, empty, 0);
    auto exact_dg = f.exact_selection_sketch(SketchKind::degree, empty, 0);
    CHECK(bs.countmin.counters == exact_cm.counters);
    CHECK(bs.degree.counters == exact_dg.counters);
  }
}

TEST_CASE("a predicate selecting nothing yields the zero sketch") {
  Fixture f;
  Predicate p;
  Condition c;
  c.op = Condition::Op::set;  // empty code set
  p.by_attr[1] = {c};
  InferenceRequest req;
  req.edges = {0};
  req.kind = SketchKind::countmin;
  req.predicate = &p;
  auto r = model_approx(f.model, 0, req);
  REQUIRE(r.is_sketch);
  CHECK(r.sketch.total() == 0.0);
  CHECK(selection_cardinality(f.model, 0, p) == 0.0);
}

TEST_CASE("scalar and sketch paths agree on the same predicate") {
  Fixture f;
  for (int64_t lo = 0; lo < 40; lo += 9) {
    Predicate p = f.range_on_f(lo, lo + 6);
    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::countmin;
    req.predicate = &p;
    auto r = model_approx(f.model, 0, req);
    double card = selection_cardinality(f.model, 0, p);
    CHECK(r.sketch.total() == doctest::Approx(card).epsilon(1e-9));
  }
}

TEST_CASE("selection cardinality") {
  Fixture f;
  Predicate empty;
  CHECK(selection_cardinality(f.model, 0, empty) == doctest::Approx(3000.0).epsilon(1e-12));

  SUBCASE("equality lands within the leaf count-min error") {
    std::vector<double> truth(64, 0.0);
    for (int64_t c : f.db.relations[0].columns[1].codes) truth[c] += 1.0;
    for (int64_t code = 0; code < 8; ++code) {
      Predicate p;
      Condition c;
      c.op = Condition::Op::eq;
      c.codes = {code};
      p.by_attr[1] = {c};
      double est = selection_cardinality(f.model, 0, p);
      CHECK(est >= truth[code] - 1e-9);  // count-min only overestimates
      CHECK(est <= 3000.0);
    }
  }
}

TEST_CASE("product nodes audit min versus product scalars") {
  Fixture f;
  for (int64_t lo = 0; lo < 48; lo += 5) {
    Predicate p = f.range_on_f(lo, lo + 4);
    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::agms;
    req.predicate = &p;
    req.mode = NodeMode::min_product;
    InferAudit audit;
    model_approx(f.model, 0, req, &audit);
    CHECK(!audit.product_scalars.empty());
    for (auto [prod, mn] : audit.product_scalars) {
      CHECK(mn >= prod - 1e-12);  // min of [0,1] factors dominates the product
      CHECK(mn <= 1.0);
      CHECK(prod >= 0.0);
    }
  }
}

TEST_CASE("min-product countmin estimates dominate product estimates") {
  Fixture f;
  for (int64_t lo = 0; lo < 48; lo += 5) {
    Predicate p = f.range_on_f(lo, lo + 4);
    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::countmin;
    req.predicate = &p;
    req.mode = NodeMode::product;
    double product_mass = model_approx(f.model, 0, req).sketch.total();
    req.mode = NodeMode::min_product;
    double min_mass = model_approx(f.model, 0, req).sketch.total();
    CHECK(min_mass >= product_mass - 1e-9);
  }
}

TEST_CASE("degree approximations stay below the exact root degree") {
  Fixture f;
  for (int64_t lo = 0; lo < 48; lo += 7) {
    Predicate p = f.range_on_f(lo, lo + 3);
    auto bs = approx_bound_sketches(f.model, 0, {0}, 0, p, NodeMode::product);
    const SketchVector* root = f.model.root_degree(0, {0}, 0);
    REQUIRE(root != nullptr);
    for (uint32_t i = 0; i < f.model.config.width; ++i)
      CHECK(bs.degree.counters[i] <= root->counters[i] + 1e-12);
  }
}

TEST_CASE("filters on join attributes stay exact while the digest is retained") {
  Fixture f;
  // equality on the join attribute x itself
  for (int64_t code = 0; code < 8; ++code) {
    Predicate p;
    Condition c;
    c.op = Condition::Op::eq;
    c.codes = {code};
    p.by_attr[0] = canonicalize_conditions({c});
    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::countmin;
    req.predicate = &p;
    auto approx = model_approx(f.model, 0, req);
    auto exact = f.exact_selection_sketch(SketchKind::countmin, p, 0);
    CHECK(approx.sketch.counters == exact.counters);
  }
}

TEST_CASE("the structural mixture identity holds") {
  // sum node over product children, each {selectivity leaf, sketch leaf}:
  // result must equal sum_i P_i(phi) * S_i(x)
  Fixture f;
  const SpnNode* sum = nullptr;
  std::function<void(const SpnNode&)> find = [&](const SpnNode& n) {
    if (sum) return;
    if (n.type == SpnNode::Type::sum) {
      bool shape = !n.children.empty();
      for (const auto& c : n.children) {
        bool is_mixture_product =
            c->type == SpnNode::Type::product && c->children.size() == 2;
        shape = shape && is_mixture_product;
      }
      if (shape) {
        sum = &n;
        return;
      }
    }
    for (const auto& c : n.children) find(*c);
  };
  find(*f.model.relations[0].spn);
  REQUIRE(sum != nullptr);

  Predicate p = f.range_on_f(10, 30);
  RelationInferContext ctx = f.model.infer_context(0);
  InferenceRequest req;
  req.edges = {0};
  req.kind = SketchKind::countmin;
  req.predicate = &p;

  std::vector<double> expected(f.model.config.width, 0.0);
  for (const auto& child : sum->children) {
    const SpnNode* sel = nullptr;
    const SpnNode* sk = nullptr;
    for (const auto& g : child->children) {
      if (g->type == SpnNode::Type::selectivity_leaf) sel = g.get();
      if (g->type == SpnNode::Type::sketch_leaf) sk = g.get();
    }
    REQUIRE(sel != nullptr);
    REQUIRE(sk != nullptr);
    auto it = p.by_attr.find(sel->sel.attr);
    double prob = leaf_selectivity(sel->sel, it == p.by_attr.end() ? nullptr : &it->second, ctx);
    const SketchLeafEntry* entry = nullptr;
    for (const auto& e : sk->sketch.entries)
      if (e.copy == 0 && e.edges == std::vector<uint32_t>{0}) entry = &e;
    REQUIRE(entry != nullptr);
    for (uint32_t i = 0; i < f.model.config.width; ++i)
      expected[i] += prob * entry->countmin.counters[i];
  }

  auto got = approx_sketch(ctx, *sum, req);
  REQUIRE(got.is_sketch);
  for (uint32_t i = 0; i < f.model.config.width; ++i)
    CHECK(got.sketch.counters[i] == doctest::Approx(expected[i]).epsilon(1e-9));
}

TEST_CASE("approximation error stays below the independence baseline on average") {
  // small-scale version of the workload-averaged L1 bound
  const size_t n = 4000;
  auto [x, fcol] = testgen::correlated_codes(n, 32, 0.85, 33);
  Schema schema = testgen::make_int_schema({{"A", {"x", "f"}}, {"B", {"x"}}});
  JoinSchema js = testgen::make_join_schema(schema, {{"e0", "A.x", "B.x"}});
  std::vector<CsvTable> tables = {testgen::csv_from_codes({"x", "f"}, {x, fcol}),
                                  testgen::csv_from_codes({"x"}, {testgen::uniform_codes(100, 32, 34)})};
  Database db = ingest_tables(tables, schema, js);

  TrainConfig fine;
  fine.seed = 4;
  fine.cluster_fraction = 0.1;
  fine.width = 256;
  fine.copies = 1;
  TrainConfig indep = fine;
  indep.cluster_fraction = 1.0;
  Model m_fine = train_model(db, fine);
  Model m_indep = train_model(db, indep);

  double sum_fine = 0.0, sum_indep = 0.0;
  int queries = 0;
  for (int64_t lo = 0; lo < 30; lo += 2) {
    Predicate p;
    Condition c;
    c.op = Condition::Op::range;
    c.lo = lo;
    c.hi = lo + 3;
    p.by_attr[1] = {c};

    auto rows = filter_rows(db.relations[0], p);
    std::vector<std::span<const int64_t>> cols = {db.relations[0].columns[0].codes};
    std::vector<EdgeHashAssignment> assigns = {m_fine.edge_assign[0][0]};
    std::vector<int8_t> orient = {1};
    auto exact = build_countmin(cols, rows, assigns, orient, fine.width);

    InferenceRequest req;
    req.edges = {0};
    req.kind = SketchKind::countmin;
    req.predicate = &p;
    auto approx = model_approx(m_fine, 0, req).sketch;
    auto base = model_approx(m_indep, 0, req).sketch;
    for (uint32_t i = 0; i < fine.width; ++i) {
      sum_fine += std::abs(exact.counters[i] - approx.counters[i]);
      sum_indep += std::abs(exact.counters[i] - base.counters[i]);
    }
    ++queries;
  }
  REQUIRE(queries >= 15);
  CHECK(sum_fine <= sum_indep);
}
