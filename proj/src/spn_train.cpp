#include "sspn/spn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "sspn/random.hpp"

namespace sspn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

constexpr uint64_t kTagNode = 0x4e0de;
constexpr uint64_t kTagChild = 0xc481d;
constexpr uint64_t kTagRdc = 0x4dc;
constexpr uint64_t kTagSample = 0x5a4b1e;
constexpr uint64_t kTagCluster = 0xc1a5;

}  // namespace

HashFamily selectivity_family(uint64_t master_seed, uint32_t rel, uint32_t attr, uint32_t level,
                              uint32_t width) {
  return make_family(HashKind::location, kDefaultDegree, width,
                     mix_seed(master_seed, 0x5e1ec7ull, rel, attr, level));
}

int8_t edge_orientation_at(const Schema& schema, const JoinEdge& edge, bool endpoint_a) {
  const auto& ra = schema.relations[edge.rel_a];
  const auto& rb = schema.relations[edge.rel_b];
  auto key_a = std::make_pair(ra.name, ra.attributes[edge.attr_a].name);
  auto key_b = std::make_pair(rb.name, rb.attributes[edge.attr_b].name);
  int8_t at_a = key_a <= key_b ? int8_t{1} : int8_t{-1};
  return endpoint_a ? at_a : static_cast<int8_t>(-at_a);
}

bool relation_is_endpoint_a(const JoinEdge& edge, uint32_t rel) {
  return edge.rel_a == rel;
}

uint32_t edge_attr_at(const JoinEdge& edge, uint32_t rel) {
  if (edge.rel_a == rel) return edge.attr_a;
  if (edge.rel_b == rel) return edge.attr_b;
  throw std::invalid_argument("edge does not touch the relation");
}

std::vector<std::vector<uint32_t>> relation_edge_subsets(const JoinSchema& join_schema,
                                                         uint32_t rel) {
  std::vector<uint32_t> incident = join_schema.incident_edges(rel);
  std::set<std::vector<uint32_t>> subsets;
  if (incident.size() <= kSubsetLatticeMaxEdges) {
    const size_t n = incident.size();
    for (size_t mask = 1; mask < (size_t{1} << n); ++mask) {
      std::vector<uint32_t> subset;
      for (size_t i = 0; i < n; ++i)
        if (mask & (size_t{1} << i)) subset.push_back(incident[i]);
      subsets.insert(std::move(subset));
    }
  } else {
    for (uint32_t e : incident) subsets.insert({e});
    for (const auto& tmpl : join_schema.templates) {
      std::vector<uint32_t> subset;
      for (uint32_t e : tmpl)
        if (std::binary_search(incident.begin(), incident.end(), e)) subset.push_back(e);
      if (!subset.empty()) subsets.insert(std::move(subset));
    }
  }
  return {subsets.begin(), subsets.end()};
}

TrainContext make_train_context(const Schema& schema, const JoinSchema& join_schema,
                                const Database& db, uint32_t rel_idx, const TrainConfig& cfg,
                                const std::vector<std::vector<EdgeHashAssignment>>& edge_assign,
                                TrainTimers* timers) {
  TrainContext ctx;
  ctx.schema = &schema;
  ctx.join_schema = &join_schema;
  ctx.rel = &db.relations[rel_idx];
  ctx.rel_idx = rel_idx;
  ctx.cfg = &cfg;
  ctx.edge_assign = &edge_assign;
  ctx.subsets = relation_edge_subsets(join_schema, rel_idx);
  ctx.join_attrs = join_schema.join_attrs(rel_idx);
  ctx.total_rows = db.relations[rel_idx].row_count;
  ctx.timers = timers;
  return ctx;
}

SelectivityLeaf build_selectivity_leaf(std::span<const int64_t> codes,
                                       std::span<const uint32_t> rows, uint64_t domain_size,
                                       uint64_t master_seed, uint32_t rel, uint32_t attr,
                                       uint32_t width) {
  SelectivityLeaf leaf;
  leaf.attr = attr;
  leaf.row_count = rows.size();
  leaf.domain_size = domain_size;

  uint32_t levels = 1;
  if (domain_size > 1) {
    uint64_t span = 1;
    while (span < domain_size) {
      span <<= 1;
      ++levels;
    }
  }
  uint32_t w = std::min(width, kSelectivityMaxWidth);

  std::vector<HashFamily> families;
  families.reserve(levels);
  for (uint32_t l = 0; l < levels; ++l)
    families.push_back(selectivity_family(master_seed, rel, attr, l, w));

  leaf.levels.assign(levels, LevelSketch{w, std::vector<double>(w, 0.0)});
  std::set<int64_t> distinct;
  for (uint32_t r : rows) {
    int64_t code = codes[r];
    if (code == kNullCode) {
      ++leaf.null_count;
      continue;
    }
    distinct.insert(code);
    for (uint32_t l = 0; l < levels; ++l)
      leaf.levels[l].counters[eval_location(families[l], code >> l)] += 1.0;
  }
  leaf.distinct_count = distinct.size();
  return leaf;
}

SketchLeaf build_sketch_leaf(const TrainContext& ctx, std::span<const uint32_t> rows,
                             std::vector<uint32_t> attrs) {
  auto t0 = Clock::now();
  std::sort(attrs.begin(), attrs.end());
  SketchLeaf leaf;
  leaf.attrs = attrs;
  leaf.row_count = rows.size();

  for (uint32_t a : attrs)
    if (ctx.join_schema->edges_at(ctx.rel_idx, a).empty())
      throw std::invalid_argument("sketch leaf attribute has no declared join edge");

  // full-scope digest, nulls kept
  std::vector<std::span<const int64_t>> attr_cols;
  for (uint32_t a : attrs) attr_cols.push_back(ctx.rel->columns[a].codes);
  FrequencyTable freq = build_frequency_table(attr_cols, rows, /*include_null_keys=*/true);
  if (freq.size() <= kDigestMaxKeys) {
    leaf.has_digest = true;
    leaf.digest.assign(freq.begin(), freq.end());
    std::sort(leaf.digest.begin(), leaf.digest.end());
  }

  const std::set<uint32_t> attr_set(attrs.begin(), attrs.end());
  for (const auto& subset : ctx.subsets) {
    // only subsets whose key attributes live in this leaf
    bool applies = true;
    std::vector<std::span<const int64_t>> edge_cols;
    std::vector<int8_t> orientations;
    for (uint32_t e : subset) {
      const JoinEdge& edge = ctx.join_schema->edges[e];
      uint32_t attr = edge_attr_at(edge, ctx.rel_idx);
      if (!attr_set.count(attr)) {
        applies = false;
        break;
      }
      edge_cols.push_back(ctx.rel->columns[attr].codes);
      orientations.push_back(edge_orientation_at(*ctx.schema, edge,
                                                 relation_is_endpoint_a(edge, ctx.rel_idx)));
    }
    if (!applies) continue;

    FrequencyTable subset_freq = build_frequency_table(edge_cols, rows);
    for (uint32_t copy = 0; copy < ctx.cfg->copies; ++copy) {
      std::vector<EdgeHashAssignment> assigns;
      for (uint32_t e : subset) assigns.push_back((*ctx.edge_assign)[e][copy]);
      SketchLeafEntry entry;
      entry.edges = subset;
      entry.copy = copy;
      entry.agms = build_agms(edge_cols, rows, assigns, orientations, ctx.cfg->width);
      entry.countmin = build_countmin(edge_cols, rows, assigns, orientations, ctx.cfg->width);
      entry.degree = build_degree(subset_freq, assigns, orientations, ctx.cfg->width);
      leaf.entries.push_back(std::move(entry));
    }
  }
  std::sort(leaf.entries.begin(), leaf.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.edges, a.copy) < std::tie(b.edges, b.copy);
  });

  for (uint32_t a : attrs) {
    leaf.attr_selectivity.push_back(build_selectivity_leaf(
        ctx.rel->columns[a].codes, rows, ctx.rel->columns[a].dict.size(), ctx.cfg->seed,
        ctx.rel_idx, a, ctx.cfg->width));
  }
  if (ctx.timers) ctx.timers->sketch_ms += ms_since(t0);
  return leaf;
}

std::vector<std::vector<uint32_t>> dependency_components(
    const std::vector<std::vector<double>>& rdc_matrix, std::span<const uint32_t> scope,
    std::span<const uint32_t> join_attrs, double tau) {
  const size_t n = scope.size();
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (rdc_matrix[i][j] > tau) parent[find(i)] = find(j);

  // keep join attributes in one component
  int first_join = -1;
  for (size_t i = 0; i < n; ++i) {
    if (std::binary_search(join_attrs.begin(), join_attrs.end(), scope[i])) {
      if (first_join < 0)
        first_join = static_cast<int>(i);
      else
        parent[find(static_cast<size_t>(first_join))] = find(i);
    }
  }

  std::map<size_t, std::vector<uint32_t>> by_root;
  for (size_t i = 0; i < n; ++i) by_root[find(i)].push_back(scope[i]);
  std::vector<std::vector<uint32_t>> out;
  for (auto& [root, attrs] : by_root) {
    std::sort(attrs.begin(), attrs.end());
    out.push_back(std::move(attrs));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// sample without replacement, deterministic
std::vector<uint32_t> sample_rows(std::span<const uint32_t> rows, size_t cap, uint64_t seed) {
  if (rows.size() <= cap) return {rows.begin(), rows.end()};
  std::vector<uint32_t> pool(rows.begin(), rows.end());
  SplitMix64 rng(seed);
  for (size_t i = 0; i < cap; ++i) {
    size_t j = i + static_cast<size_t>(rng.next_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cap);
  return pool;
}

std::vector<std::vector<double>> rdc_matrix(const TrainContext& ctx,
                                            std::span<const uint32_t> rows,
                                            std::span<const uint32_t> scope, uint64_t node_seed) {
  auto sampled = sample_rows(rows, kRdcSampleCap, mix_seed(node_seed, kTagSample));
  const size_t n = scope.size();
  std::vector<std::vector<int64_t>> cols(n, std::vector<int64_t>(sampled.size()));
  for (size_t a = 0; a < n; ++a) {
    const auto& codes = ctx.rel->columns[scope[a]].codes;
    for (size_t i = 0; i < sampled.size(); ++i) cols[a][i] = codes[sampled[i]];
  }
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double v = rdc(cols[i], cols[j], ctx.cfg->rdc_features, ctx.cfg->rdc_scale,
                     mix_seed(node_seed, kTagRdc, scope[i], scope[j]));
      m[i][j] = m[j][i] = v;
    }
  }
  return m;
}

bool is_join_attr(const TrainContext& ctx, uint32_t attr) {
  return std::binary_search(ctx.join_attrs.begin(), ctx.join_attrs.end(), attr);
}

std::unique_ptr<SpnNode> make_leaf(const TrainContext& ctx, std::vector<uint32_t> rows,
                                   std::vector<uint32_t> scope) {
  auto node = std::make_unique<SpnNode>();
  node->scope = scope;
  node->row_count = rows.size();
  bool all_join = std::all_of(scope.begin(), scope.end(),
                              [&](uint32_t a) { return is_join_attr(ctx, a); });
  if (all_join) {
    node->type = SpnNode::Type::sketch_leaf;
    node->sketch = build_sketch_leaf(ctx, rows, scope);
  } else {
    if (scope.size() != 1) throw std::logic_error("selectivity leaf must cover one attribute");
    node->type = SpnNode::Type::selectivity_leaf;
    uint32_t a = scope[0];
    node->sel = build_selectivity_leaf(ctx.rel->columns[a].codes, rows,
                                       ctx.rel->columns[a].dict.size(), ctx.cfg->seed,
                                       ctx.rel_idx, a, ctx.cfg->width);
  }
  return node;
}

}  // namespace

std::unique_ptr<SpnNode> train_spn(const TrainContext& ctx, std::vector<uint32_t> rows,
                                   std::vector<uint32_t> scope, uint64_t node_seed) {
  if (rows.empty()) throw std::invalid_argument("cannot train on an empty partition");
  if (scope.empty()) throw std::invalid_argument("cannot train on an empty scope");
  std::sort(scope.begin(), scope.end());

  // single attribute or a pure join-attribute scope terminates in a leaf
  if (scope.size() == 1 ||
      std::all_of(scope.begin(), scope.end(), [&](uint32_t a) { return is_join_attr(ctx, a); }))
    return make_leaf(ctx, std::move(rows), std::move(scope));

  auto t0 = Clock::now();
  auto matrix = rdc_matrix(ctx, rows, scope, node_seed);
  auto groups = dependency_components(matrix, scope, ctx.join_attrs, ctx.cfg->rdc_threshold);
  if (ctx.timers) ctx.timers->structure_ms += ms_since(t0);

  if (groups.size() > 1) {
    auto node = std::make_unique<SpnNode>();
    node->type = SpnNode::Type::product;
    node->scope = scope;
    node->row_count = rows.size();
    for (size_t i = 0; i < groups.size(); ++i)
      node->children.push_back(
          train_spn(ctx, rows, groups[i], mix_seed(node_seed, kTagChild, i)));
    return node;
  }

  const double gamma = ctx.cfg->cluster_fraction;
  if (static_cast<double>(rows.size()) > gamma * static_cast<double>(ctx.total_rows) &&
      rows.size() >= 2) {
    auto t1 = Clock::now();
    std::vector<std::span<const int64_t>> cols;
    for (uint32_t a : scope) cols.push_back(ctx.rel->columns[a].codes);
    auto split = cluster_rows(cols, rows, ctx.cfg->cluster_method, ctx.cfg->rdc_features,
                              ctx.cfg->rdc_scale, mix_seed(node_seed, kTagCluster));
    if (ctx.timers) ctx.timers->structure_ms += ms_since(t1);

    auto node = std::make_unique<SpnNode>();
    node->type = SpnNode::Type::sum;
    node->scope = scope;
    node->row_count = rows.size();
    for (int b = 0; b < 2; ++b) {
      node->child_rows.push_back(split.blocks[b].size());
      node->children.push_back(train_spn(ctx, std::move(split.blocks[b]), scope,
                                         mix_seed(node_seed, kTagChild, 0x5b1ull, b)));
    }
    return node;
  }

  // at/below the clustering threshold: one leaf per attribute, join
  // attributes of the partition stay together in one sketch leaf
  auto node = std::make_unique<SpnNode>();
  node->type = SpnNode::Type::product;
  node->scope = scope;
  node->row_count = rows.size();
  std::vector<uint32_t> join_here;
  for (uint32_t a : scope) {
    if (is_join_attr(ctx, a))
      join_here.push_back(a);
    else
      node->children.push_back(make_leaf(ctx, rows, {a}));
  }
  if (!join_here.empty())
    node->children.insert(node->children.begin(), make_leaf(ctx, rows, join_here));
  return node;
}

}  // namespace sspn
