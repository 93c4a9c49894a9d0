#include "sspn/infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sspn {

std::vector<DyadicInterval> dyadic_cover(int64_t lo, int64_t hi) {
  std::vector<DyadicInterval> out;
  if (lo > hi || lo < 0) return out;
  int64_t pos = lo;
  while (pos <= hi) {
    uint32_t level = 0;
    // largest aligned block starting at pos that still fits
    while (true) {
      uint32_t next = level + 1;
      int64_t len = int64_t{1} << next;
      if (pos % len != 0) break;
      if (pos + len - 1 > hi) break;
      level = next;
    }
    int64_t len = int64_t{1} << level;
    out.push_back({pos, pos + len - 1, level});
    pos += len;
  }
  return out;
}

namespace {

double point_estimate(const SelectivityLeaf& leaf, const RelationInferContext& ctx,
                      uint32_t level, int64_t key) {
  const LevelSketch& s = leaf.levels[level];
  HashFamily family = selectivity_family(ctx.master_seed, ctx.rel, leaf.attr, level, s.width);
  return s.counters[eval_location(family, key)];
}

}  // namespace

double leaf_selectivity(const SelectivityLeaf& leaf, const std::vector<Condition>* conditions,
                        const RelationInferContext& ctx) {
  if (conditions == nullptr || conditions->empty()) return 1.0;  // marginalized out
  if (leaf.row_count == 0) return 0.0;
  const int64_t domain = static_cast<int64_t>(leaf.domain_size);
  double count = 0.0;
  for (const auto& c : *conditions) {
    switch (c.op) {
      case Condition::Op::eq:
      case Condition::Op::set:
        for (int64_t code : c.codes) {
          if (code < 0 || code >= domain) continue;  // outside the dictionary
          count += point_estimate(leaf, ctx, 0, code);
        }
        break;
      case Condition::Op::range: {
        int64_t lo = std::max<int64_t>(c.lo, 0);
        int64_t hi = std::min<int64_t>(c.hi, domain - 1);
        for (const auto& iv : dyadic_cover(lo, hi)) {
          // clamped ranges never exceed the sketched levels
          if (iv.level >= leaf.levels.size())
            throw std::logic_error("dyadic interval beyond sketched levels");
          count += point_estimate(leaf, ctx, iv.level, iv.lo >> iv.level);
        }
        break;
      }
    }
  }
  double p = count / static_cast<double>(leaf.row_count);
  return std::min(std::max(p, 0.0), 1.0);
}

namespace {

const std::vector<Condition>* conditions_for(const Predicate* predicate, uint32_t attr) {
  if (predicate == nullptr) return nullptr;
  auto it = predicate->by_attr.find(attr);
  return it == predicate->by_attr.end() ? nullptr : &it->second;
}

bool key_matches(const Predicate* predicate, std::span<const uint32_t> attrs,
                 std::span<const int64_t> key) {
  if (predicate == nullptr) return true;
  for (size_t i = 0; i < attrs.size(); ++i)
    if (!predicate->matches(attrs[i], key[i])) return false;
  return true;
}

const SketchLeafEntry& find_entry(const SketchLeaf& leaf, const InferenceRequest& request) {
  for (const auto& e : leaf.entries)
    if (e.copy == request.copy && e.edges == request.edges) return e;
  throw std::runtime_error("no sketch materialized for the requested edge subset");
}

const SketchVector& entry_kind(const SketchLeafEntry& entry, SketchKind kind) {
  switch (kind) {
    case SketchKind::agms: return entry.agms;
    case SketchKind::countmin: return entry.countmin;
    case SketchKind::degree: return entry.degree;
  }
  throw std::logic_error("bad sketch kind");
}

// rebuild the entry's sketch from the digest restricted to matching keys
SketchVector sketch_from_digest(const RelationInferContext& ctx, const SketchLeaf& leaf,
                                const SketchLeafEntry& entry, const InferenceRequest& request) {
  std::vector<EdgeHashAssignment> assigns;
  std::vector<size_t> key_pos;  // position of each edge's attribute in leaf.attrs
  for (uint32_t e : entry.edges) {
    assigns.push_back((*ctx.edge_assign)[e][entry.copy]);
    uint32_t attr = edge_attr_at(ctx.join_schema->edges[e], ctx.rel);
    auto it = std::find(leaf.attrs.begin(), leaf.attrs.end(), attr);
    if (it == leaf.attrs.end()) throw std::logic_error("edge attribute missing from leaf scope");
    key_pos.push_back(static_cast<size_t>(it - leaf.attrs.begin()));
  }
  const auto& orientations = entry.agms.config.orientations;

  SketchVector out;
  out.config = entry_kind(entry, request.kind).config;
  out.counters.assign(out.config.width, 0.0);

  FrequencyTable degree_freq;
  std::vector<int64_t> sub_key(entry.edges.size());
  for (const auto& [key, count] : leaf.digest) {
    if (!key_matches(request.predicate, leaf.attrs, key)) continue;
    bool null_key = false;
    for (size_t i = 0; i < key_pos.size(); ++i) {
      sub_key[i] = key[key_pos[i]];
      if (sub_key[i] == kNullCode) null_key = true;
    }
    if (null_key) continue;
    if (request.kind == SketchKind::degree) {
      degree_freq[sub_key] += count;
      continue;
    }
    uint64_t b = locate(assigns, orientations, sub_key, out.config.width);
    double value = static_cast<double>(count);
    if (request.kind == SketchKind::agms)
      value *= sign_product(assigns, sub_key);
    out.counters[b] += value;
  }
  if (request.kind == SketchKind::degree) {
    for (const auto& [key, count] : degree_freq) {
      uint64_t b = locate(assigns, orientations, key, out.config.width);
      out.counters[b] = std::max(out.counters[b], static_cast<double>(count));
    }
  }
  return out;
}

double digest_selectivity(const SketchLeaf& leaf, const Predicate* predicate) {
  int64_t matched = 0;
  for (const auto& [key, count] : leaf.digest)
    if (key_matches(predicate, leaf.attrs, key)) matched += count;
  return leaf.row_count == 0 ? 0.0
                             : static_cast<double>(matched) / static_cast<double>(leaf.row_count);
}

InferResult scalar_result(double p) {
  InferResult r;
  r.is_sketch = false;
  r.scalar = p;
  return r;
}

bool has_conditions_on(const Predicate* predicate, std::span<const uint32_t> attrs) {
  if (predicate == nullptr) return false;
  for (uint32_t a : attrs)
    if (predicate->by_attr.count(a)) return true;
  return false;
}

InferResult sketch_leaf_result(const RelationInferContext& ctx, const SketchLeaf& leaf,
                               const InferenceRequest& request) {
  const bool conditioned = has_conditions_on(request.predicate, leaf.attrs);

  if (request.edges.empty()) {
    // pure selectivity over the leaf's join attributes
    if (!conditioned) return scalar_result(1.0);
    if (leaf.has_digest) return scalar_result(digest_selectivity(leaf, request.predicate));
    double p = 1.0;
    for (size_t i = 0; i < leaf.attrs.size(); ++i)
      p *= leaf_selectivity(leaf.attr_selectivity[i],
                            conditions_for(request.predicate, leaf.attrs[i]), ctx);
    return scalar_result(p);
  }

  const SketchLeafEntry& entry = find_entry(leaf, request);
  InferResult r;
  r.is_sketch = true;
  if (!conditioned) {
    r.sketch = entry_kind(entry, request.kind);
    return r;
  }
  if (leaf.has_digest) {
    r.sketch = sketch_from_digest(ctx, leaf, entry, request);
    return r;
  }
  // independence fallback local to this leaf
  double p = 1.0;
  for (size_t i = 0; i < leaf.attrs.size(); ++i)
    p *= leaf_selectivity(leaf.attr_selectivity[i],
                          conditions_for(request.predicate, leaf.attrs[i]), ctx);
  r.sketch = scale(entry_kind(entry, request.kind), p);
  return r;
}

// descend to any sketch leaf holding the requested entry, without building
const SketchVector* find_config(const SpnNode& node, const InferenceRequest& request) {
  if (node.type == SpnNode::Type::sketch_leaf)
    return &entry_kind(find_entry(node.sketch, request), request.kind);
  for (const auto& child : node.children) {
    try {
      return find_config(*child, request);
    } catch (const std::exception&) {
      continue;
    }
  }
  throw std::runtime_error("no sketch materialized for the requested edge subset");
}

}  // namespace

InferResult approx_sketch(const RelationInferContext& ctx, const SpnNode& node,
                          const InferenceRequest& request, InferAudit* audit) {
  switch (node.type) {
    case SpnNode::Type::selectivity_leaf:
      return scalar_result(
          leaf_selectivity(node.sel, conditions_for(request.predicate, node.sel.attr), ctx));

    case SpnNode::Type::sketch_leaf:
      return sketch_leaf_result(ctx, node.sketch, request);

    case SpnNode::Type::product: {
      // children partition the scope; at most one of them can own the
      // requested join attributes
      const SpnNode* sketch_child = nullptr;
      if (!request.edges.empty()) {
        std::vector<uint32_t> attrs;
        for (uint32_t e : request.edges)
          attrs.push_back(edge_attr_at(ctx.join_schema->edges[e], ctx.rel));
        std::sort(attrs.begin(), attrs.end());
        attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
        for (const auto& child : node.children) {
          bool all = std::all_of(attrs.begin(), attrs.end(), [&](uint32_t a) {
            return std::binary_search(child->scope.begin(), child->scope.end(), a);
          });
          if (all) {
            sketch_child = child.get();
            break;
          }
        }
        if (sketch_child == nullptr)
          throw std::runtime_error(
              "requested join attributes span multiple children of a product node");
      }

      double prod = 1.0, minimum = 1.0;
      for (const auto& child : node.children) {
        if (child.get() == sketch_child) continue;
        double s = approx_sketch(ctx, *child, request, audit).scalar;
        prod *= s;
        minimum = std::min(minimum, s);
      }
      if (audit) audit->product_scalars.push_back({prod, minimum});
      double factor = request.mode == NodeMode::min_product ? minimum : prod;

      if (sketch_child == nullptr) return scalar_result(factor);
      if (factor == 0.0) {
        // short-circuit: a zero scalar zeroes the sketch
        InferResult r;
        r.is_sketch = true;
        r.sketch.config = find_config(*sketch_child, request)->config;
        r.sketch.counters.assign(r.sketch.config.width, 0.0);
        return r;
      }
      InferResult r = approx_sketch(ctx, *sketch_child, request, audit);
      if (!r.is_sketch) throw std::logic_error("expected a sketch from the owning child");
      scale_inplace(r.sketch, factor);
      return r;
    }

    case SpnNode::Type::sum: {
      if (request.edges.empty()) {
        // weighted scalar mixture, |V_i|/|V|
        double total = 0.0;
        for (size_t i = 0; i < node.children.size(); ++i) {
          double s = approx_sketch(ctx, *node.children[i], request, audit).scalar;
          total += static_cast<double>(node.child_rows[i]) * s;
        }
        return scalar_result(total / static_cast<double>(node.row_count));
      }
      // sketches already carry their partition mass: unweighted sum
      InferResult acc = approx_sketch(ctx, *node.children[0], request, audit);
      if (!acc.is_sketch) throw std::logic_error("expected sketches under a sum node");
      for (size_t i = 1; i < node.children.size(); ++i) {
        InferResult r = approx_sketch(ctx, *node.children[i], request, audit);
        add_inplace(acc.sketch, r.sketch);
      }
      return acc;
    }
  }
  throw std::logic_error("bad node type");
}

}  // namespace sspn
