#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sspn/estimator.hpp"
#include "support/gen.hpp"

using namespace sspn;

namespace {

// one query-side relation: its incident edges, per-edge key columns and
// orientations, plus the shared per-edge assignments of one copy
struct Side {
  std::vector<uint32_t> edges;
  std::vector<std::vector<int64_t>> cols;  // aligned with edges
  std::vector<int8_t> orient;
  std::vector<EdgeHashAssignment> assigns;
};

Side make_side(uint64_t seed, uint32_t width, std::vector<uint32_t> edges,
               std::vector<std::vector<int64_t>> cols, std::vector<int8_t> orient) {
  Side s;
  s.edges = std::move(edges);
  s.cols = std::move(cols);
  s.orient = std::move(orient);
  for (uint32_t e : s.edges) s.assigns.push_back(make_edge_assignment(seed, e, 0, width));
  return s;
}

SketchVector side_sketch(const Side& s, uint32_t width, SketchKind kind) {
  std::vector<std::span<const int64_t>> spans(s.cols.begin(), s.cols.end());
  std::vector<uint32_t> rows(s.cols[0].size());
  std::iota(rows.begin(), rows.end(), 0);
  switch (kind) {
    case SketchKind::agms: return build_agms(spans, rows, s.assigns, s.orient, width);
    case SketchKind::countmin: return build_countmin(spans, rows, s.assigns, s.orient, width);
    case SketchKind::degree:
      return build_degree(build_frequency_table(spans, rows), s.assigns, s.orient, width);
  }
  throw std::logic_error("kind");
}

// no cross-combination of realized keys may land on phase 0 unless every
// edge matches
bool phase_exact(const std::vector<Side>& sides, uint32_t width) {
  std::vector<std::vector<std::vector<int64_t>>> keys(sides.size());
  for (size_t v = 0; v < sides.size(); ++v) {
    std::vector<std::span<const int64_t>> spans(sides[v].cols.begin(), sides[v].cols.end());
    std::vector<uint32_t> rows(sides[v].cols[0].size());
    std::iota(rows.begin(), rows.end(), 0);
    for (const auto& [key, cnt] : build_frequency_table(spans, rows)) keys[v].push_back(key);
  }
  std::vector<size_t> pick(sides.size(), 0);
  for (;;) {
    uint64_t phase = 0;
    for (size_t v = 0; v < sides.size(); ++v)
      phase += locate(sides[v].assigns, sides[v].orient, keys[v][pick[v]], width);
    bool all_match = true;
    for (size_t v = 0; v < sides.size() && all_match; ++v) {
      for (size_t i = 0; i < sides[v].edges.size() && all_match; ++i) {
        uint32_t e = sides[v].edges[i];
        for (size_t u = 0; u < v && all_match; ++u) {
          auto it = std::find(sides[u].edges.begin(), sides[u].edges.end(), e);
          if (it == sides[u].edges.end()) continue;
          size_t j = static_cast<size_t>(it - sides[u].edges.begin());
          if (keys[u][pick[u]][j] != keys[v][pick[v]][i]) all_match = false;
        }
      }
    }
    if ((phase % width == 0) != all_match) return false;
    size_t p = 0;
    while (p < sides.size()) {
      if (++pick[p] < keys[p].size()) break;
      pick[p] = 0;
      ++p;
    }
    if (p == sides.size()) break;
  }
  return true;
}

JoinGraph chain_graph(uint32_t n) {
  JoinGraph g;
  g.vertex_count = n;
  for (uint32_t i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, i});
  return g;
}

}  // namespace

TEST_CASE("two single-row relations with equal keys contract to one") {
  const uint32_t w = 16;
  auto a = make_side(1, w, {0}, {{7}}, {1});
  auto b = make_side(1, w, {0}, {{7}}, {-1});
  auto sa = side_sketch(a, w, SketchKind::agms);
  auto sb = side_sketch(b, w, SketchKind::agms);
  const SketchVector* sk[2] = {&sa, &sb};
  CHECK(contract(sk, chain_graph(2)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("disjoint collision-free keys contract to zero") {
  const uint32_t w = 64;
  uint64_t seed = 0;
  for (;; ++seed) {  // engineer bucket-disjoint key sets
    auto fam = make_edge_assignment(seed, 0, 0, w).location;
    std::set<uint64_t> ba, bb;
    for (int64_t v = 0; v < 8; ++v) ba.insert(eval_location(fam, v));
    for (int64_t v = 8; v < 16; ++v) bb.insert(eval_location(fam, v));
    std::vector<uint64_t> inter;
    std::set_intersection(ba.begin(), ba.end(), bb.begin(), bb.end(), std::back_inserter(inter));
    if (inter.empty() && ba.size() == 8 && bb.size() == 8) break;
    REQUIRE(seed < 1000);
  }
  std::vector<int64_t> ka(8), kb(8);
  std::iota(ka.begin(), ka.end(), 0);
  std::iota(kb.begin(), kb.end(), 8);
  auto a = make_side(seed, w, {0}, {ka}, {1});
  auto b = make_side(seed, w, {0}, {kb}, {-1});
  auto sa = side_sketch(a, w, SketchKind::agms);
  auto sb = side_sketch(b, w, SketchKind::agms);
  const SketchVector* sk[2] = {&sa, &sb};
  CHECK(contract(sk, chain_graph(2)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("two-way contraction equals the reversed dot product") {
  const uint32_t w = 32;
  auto xa = testgen::uniform_codes(60, 20, 3);
  auto xb = testgen::uniform_codes(40, 20, 4);
  auto a = make_side(5, w, {0}, {xa}, {1});
  auto b = make_side(5, w, {0}, {xb}, {-1});
  auto sa = side_sketch(a, w, SketchKind::agms);
  auto sb = side_sketch(b, w, SketchKind::agms);
  const SketchVector* sk[2] = {&sa, &sb};
  double est = contract(sk, chain_graph(2));

  double dot = 0.0;
  for (uint32_t i = 0; i < w; ++i) dot += sa.counters[i] * sb.counters[(w - i) % w];
  CHECK(est == doctest::Approx(dot).epsilon(1e-9));
}

TEST_CASE("three-way chain matches the explicit tensor contraction") {
  const uint32_t w = 8;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto ax = testgen::uniform_codes(20, 6, seed * 3 + 1);
    auto bx = testgen::uniform_codes(20, 6, seed * 3 + 2);
    auto by = testgen::uniform_codes(20, 5, seed * 5 + 3);
    auto cy = testgen::uniform_codes(20, 5, seed * 7 + 4);

    auto a = make_side(seed, w, {0}, {ax}, {1});
    auto b = make_side(seed, w, {0, 1}, {bx, by}, {-1, 1});
    auto c = make_side(seed, w, {1}, {cy}, {-1});
    auto sa = side_sketch(a, w, SketchKind::agms);
    auto sb = side_sketch(b, w, SketchKind::agms);
    auto sc = side_sketch(c, w, SketchKind::agms);
    const SketchVector* sk[3] = {&sa, &sb, &sc};
    double fast = contract(sk, chain_graph(3));
    double slow = testgen::direct_contract({&sa, &sb, &sc});
    CHECK(fast == doctest::Approx(slow).epsilon(1e-6));
  }
}

TEST_CASE("contraction is invariant to vertex enumeration order") {
  const uint32_t w = 16;
  auto ax = testgen::uniform_codes(30, 8, 11);
  auto bx = testgen::uniform_codes(30, 8, 12);
  auto by = testgen::uniform_codes(30, 7, 13);
  auto cy = testgen::uniform_codes(30, 7, 14);
  auto a = make_side(9, w, {0}, {ax}, {1});
  auto b = make_side(9, w, {0, 1}, {bx, by}, {-1, 1});
  auto c = make_side(9, w, {1}, {cy}, {-1});
  auto sa = side_sketch(a, w, SketchKind::agms);
  auto sb = side_sketch(b, w, SketchKind::agms);
  auto sc = side_sketch(c, w, SketchKind::agms);

  const SketchVector* fwd[3] = {&sa, &sb, &sc};
  double e1 = contract(fwd, chain_graph(3));

  JoinGraph reversed;  // C, B, A
  reversed.vertex_count = 3;
  reversed.edges.push_back({2, 1, 0});
  reversed.edges.push_back({1, 0, 1});
  const SketchVector* bwd[3] = {&sc, &sb, &sa};
  double e2 = contract(bwd, reversed);
  CHECK(e1 == doctest::Approx(e2).epsilon(1e-9));
}

TEST_CASE("collision-free toy joins are exact") {
  // chain and transitive 3-way joins over <= 8 distinct keys per relation;
  // the seed is scanned until no cross-combination aliases to phase 0
  const uint32_t w = 4096;

  SUBCASE("chain") {
    auto ax = testgen::uniform_codes(12, 8, 21);
    auto bx = testgen::uniform_codes(15, 8, 22);
    auto by = testgen::uniform_codes(15, 6, 23);
    auto cy = testgen::uniform_codes(10, 6, 24);
    uint64_t seed = 0;
    for (;; ++seed) {
      auto a = make_side(seed, w, {0}, {ax}, {1});
      auto b = make_side(seed, w, {0, 1}, {bx, by}, {-1, 1});
      auto c = make_side(seed, w, {1}, {cy}, {-1});
      if (phase_exact({a, b, c}, w)) break;
      REQUIRE(seed < 200);
    }
    auto a = make_side(seed, w, {0}, {ax}, {1});
    auto b = make_side(seed, w, {0, 1}, {bx, by}, {-1, 1});
    auto c = make_side(seed, w, {1}, {cy}, {-1});
    auto sa = side_sketch(a, w, SketchKind::agms);
    auto sb = side_sketch(b, w, SketchKind::agms);
    auto sc = side_sketch(c, w, SketchKind::agms);

    double truth = 0.0;  // nested loops
    for (int64_t va : ax)
      for (size_t i = 0; i < bx.size(); ++i)
        for (int64_t vc : cy)
          if (va == bx[i] && by[i] == vc) truth += 1.0;

    const SketchVector* sk[3] = {&sa, &sb, &sc};
    double est = contract(sk, chain_graph(3));
    CHECK(std::llround(est) == std::llround(truth));
    CHECK(std::abs(est - truth) < 1e-3);
  }

  SUBCASE("transitive") {
    // A.x = B.x and B.x = C.x decomposed into two edges; B carries both
    auto ax = testgen::uniform_codes(12, 8, 31);
    auto bx = testgen::uniform_codes(14, 8, 32);
    auto cx = testgen::uniform_codes(10, 8, 33);
    uint64_t seed = 0;
    for (;; ++seed) {
      auto a = make_side(seed, w, {0}, {ax}, {1});
      auto b = make_side(seed, w, {0, 1}, {bx, bx}, {-1, 1});
      auto c = make_side(seed, w, {1}, {cx}, {-1});
      if (phase_exact({a, b, c}, w)) break;
      REQUIRE(seed < 200);
    }
    auto a = make_side(seed, w, {0}, {ax}, {1});
    auto b = make_side(seed, w, {0, 1}, {bx, bx}, {-1, 1});
    auto c = make_side(seed, w, {1}, {cx}, {-1});
    auto sa = side_sketch(a, w, SketchKind::agms);
    auto sb = side_sketch(b, w, SketchKind::agms);
    auto sc = side_sketch(c, w, SketchKind::agms);

    double truth = 0.0;
    for (int64_t va : ax)
      for (int64_t vb : bx)
        for (int64_t vc : cx)
          if (va == vb && vb == vc) truth += 1.0;

    const SketchVector* sk[3] = {&sa, &sb, &sc};
    double est = contract(sk, chain_graph(3));
    CHECK(std::llround(est) == std::llround(truth));
    CHECK(std::abs(est - truth) < 1e-3);
  }
}

TEST_CASE("single-copy estimates are unbiased") {
  // fixed two-way zipf join, fresh hash families per seed; the sample mean
  // must stay within 3 standard errors of the truth
  const uint32_t w = 128;
  auto xa = testgen::zipf_codes(1000, 100, 1.1, 51);
  auto xb = testgen::zipf_codes(1000, 100, 1.1, 52);
  std::map<int64_t, double> fa, fb;
  for (int64_t v : xa) fa[v] += 1.0;
  for (int64_t v : xb) fb[v] += 1.0;
  double truth = 0.0;
  for (const auto& [v, f] : fa) {
    auto it = fb.find(v);
    if (it != fb.end()) truth += f * it->second;
  }

  const int trials = 200;
  std::vector<double> estimates;
  for (int t = 0; t < trials; ++t) {
    auto a = make_side(1000 + t, w, {0}, {xa}, {1});
    auto b = make_side(1000 + t, w, {0}, {xb}, {-1});
    auto sa = side_sketch(a, w, SketchKind::agms);
    auto sb = side_sketch(b, w, SketchKind::agms);
    const SketchVector* sk[2] = {&sa, &sb};
    estimates.push_back(contract(sk, chain_graph(2)));
  }
  double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / trials;
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= trials - 1;
  double stderr_mean = std::sqrt(var / trials);
  CHECK(std::abs(mean - truth) <= 3.0 * stderr_mean);
}

TEST_CASE("bound estimates dominate the truth") {
  const uint32_t w = 32;
  int violations = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto ax = testgen::zipf_codes(50, 16, 1.0, seed * 11 + 1);
    auto bx = testgen::zipf_codes(50, 16, 1.0, seed * 11 + 2);
    auto by = testgen::zipf_codes(50, 12, 1.0, seed * 11 + 3);
    auto cy = testgen::zipf_codes(50, 12, 1.0, seed * 11 + 4);

    double truth = 0.0;
    for (int64_t va : ax)
      for (size_t i = 0; i < bx.size(); ++i)
        for (int64_t vc : cy)
          if (va == bx[i] && by[i] == vc) truth += 1.0;

    auto a = make_side(seed, w, {0}, {ax}, {1});
    auto b = make_side(seed, w, {0, 1}, {bx, by}, {-1, 1});
    auto c = make_side(seed, w, {1}, {cy}, {-1});
    SketchVector cm[3] = {side_sketch(a, w, SketchKind::countmin),
                          side_sketch(b, w, SketchKind::countmin),
                          side_sketch(c, w, SketchKind::countmin)};
    SketchVector dg[3] = {side_sketch(a, w, SketchKind::degree),
                          side_sketch(b, w, SketchKind::degree),
                          side_sketch(c, w, SketchKind::degree)};
    const SketchVector* cmp[3] = {&cm[0], &cm[1], &cm[2]};
    const SketchVector* dgp[3] = {&dg[0], &dg[1], &dg[2]};

    auto g = chain_graph(3);
    double best = bound_estimate(cmp, dgp, g);
    for (uint32_t v = 0; v < 3; ++v) CHECK(contract_bound(cmp, dgp, g, v) >= 0.0);
    if (best < truth - 1e-6) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("two-way bound with all-distinct keys is exact under collision-free buckets") {
  const uint32_t w = 4096;
  std::vector<int64_t> ka(20), kb(25);
  std::iota(ka.begin(), ka.end(), 0);   // distinct keys 0..19
  std::iota(kb.begin(), kb.end(), 10);  // distinct keys 10..34
  uint64_t seed = 0;
  for (;; ++seed) {
    auto a = make_side(seed, w, {0}, {ka}, {1});
    auto b = make_side(seed, w, {0}, {kb}, {-1});
    if (phase_exact({a, b}, w)) break;
    REQUIRE(seed < 200);
  }
  auto a = make_side(seed, w, {0}, {ka}, {1});
  auto b = make_side(seed, w, {0}, {kb}, {-1});
  SketchVector cm[2] = {side_sketch(a, w, SketchKind::countmin),
                        side_sketch(b, w, SketchKind::countmin)};
  SketchVector dg[2] = {side_sketch(a, w, SketchKind::degree),
                        side_sketch(b, w, SketchKind::degree)};
  const SketchVector* cmp[2] = {&cm[0], &cm[1]};
  const SketchVector* dgp[2] = {&dg[0], &dg[1]};
  auto g = chain_graph(2);
  double truth = 10.0;  // overlap 10..19
  CHECK(contract_bound(cmp, dgp, g, 0) == doctest::Approx(truth).epsilon(1e-9));
  CHECK(contract_bound(cmp, dgp, g, 1) == doctest::Approx(truth).epsilon(1e-9));
}

TEST_CASE("single matching rows keep every bound choice at or above one") {
  const uint32_t w = 64;
  auto a = make_side(3, w, {0}, {{5}}, {1});
  auto b = make_side(3, w, {0}, {{5}}, {-1});
  SketchVector cm[2] = {side_sketch(a, w, SketchKind::countmin),
                        side_sketch(b, w, SketchKind::countmin)};
  SketchVector dg[2] = {side_sketch(a, w, SketchKind::degree),
                        side_sketch(b, w, SketchKind::degree)};
  const SketchVector* cmp[2] = {&cm[0], &cm[1]};
  const SketchVector* dgp[2] = {&dg[0], &dg[1]};
  auto g = chain_graph(2);
  for (uint32_t v = 0; v < 2; ++v) CHECK(contract_bound(cmp, dgp, g, v) >= 1.0 - 1e-9);
}

TEST_CASE("combine_estimates") {
  std::vector<double> es = {2, 10, 4};
  CHECK(combine_estimates(es, Variant::fagms_median) == 4.0);
  CHECK(combine_estimates(es, Variant::fagms_max) == 10.0);
  CHECK(combine_estimates(es, Variant::bound) == 2.0);

  std::vector<double> one = {7.5};
  CHECK(combine_estimates(one, Variant::fagms_median) == 7.5);
  CHECK(combine_estimates(one, Variant::fagms_max) == 7.5);
  CHECK(combine_estimates(one, Variant::bound) == 7.5);

  std::vector<double> even = {1, 2, 8, 100};
  CHECK(combine_estimates(even, Variant::fagms_median) == 5.0);  // mean of middle two

  std::vector<double> tiny = {0.25, 0.5};
  CHECK(combine_estimates(tiny, Variant::fagms_max) == 1.0);  // floored at one

  std::vector<double> none;
  CHECK_THROWS_AS(combine_estimates(none, Variant::bound), std::invalid_argument);
}

TEST_CASE("contract validates its inputs") {
  const uint32_t w = 16;
  auto a = make_side(2, w, {0}, {{1}}, {1});
  auto b = make_side(2, w, {0}, {{1}}, {-1});
  auto sa = side_sketch(a, w, SketchKind::agms);
  auto sb = side_sketch(b, w, SketchKind::agms);

  SUBCASE("same orientation at both endpoints") {
    auto b2 = make_side(2, w, {0}, {{1}}, {1});
    auto sb2 = side_sketch(b2, w, SketchKind::agms);
    const SketchVector* sk[2] = {&sa, &sb2};
    CHECK_THROWS_AS(contract(sk, chain_graph(2)), std::invalid_argument);
  }
  SUBCASE("width mismatch") {
    auto b2 = make_side(2, 32, {0}, {{1}}, {-1});
    auto sb2 = side_sketch(b2, 32, SketchKind::agms);
    const SketchVector* sk[2] = {&sa, &sb2};
    CHECK_THROWS_AS(contract(sk, chain_graph(2)), std::invalid_argument);
  }
  SUBCASE("subset differs from incident edges") {
    auto b2 = make_side(2, w, {1}, {{1}}, {-1});
    auto sb2 = side_sketch(b2, w, SketchKind::agms);
    const SketchVector* sk[2] = {&sa, &sb2};
    CHECK_THROWS_AS(contract(sk, chain_graph(2)), std::invalid_argument);
  }
  SUBCASE("non-agms kinds are rejected") {
    auto ca = side_sketch(a, w, SketchKind::countmin);
    auto cb = side_sketch(b, w, SketchKind::countmin);
    const SketchVector* sk[2] = {&ca, &cb};
    CHECK_THROWS_AS(contract(sk, chain_graph(2)), std::invalid_argument);
  }
  SUBCASE("cyclic graphs are rejected") {
    JoinGraph g;
    g.vertex_count = 3;
    g.edges = {{0, 1, 0}, {1, 2, 1}, {2, 0, 2}};
    CHECK_THROWS_AS(validate_join_graph(g), std::invalid_argument);
  }
  SUBCASE("disconnected graphs are rejected") {
    JoinGraph g;
    g.vertex_count = 3;
    g.edges = {{0, 1, 0}};
    CHECK_THROWS_AS(validate_join_graph(g), std::invalid_argument);
  }
  SUBCASE("parallel edges between one pair are allowed") {
    JoinGraph g;
    g.vertex_count = 2;
    g.edges = {{0, 1, 0}, {0, 1, 1}};
    CHECK_NOTHROW(validate_join_graph(g));
  }
}
