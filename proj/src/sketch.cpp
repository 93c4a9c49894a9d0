#include "sspn/sketch.hpp"

#include <algorithm>
#include <stdexcept>

namespace sspn {

namespace {

void check_aligned(std::span<const EdgeHashAssignment> assignments,
                   std::span<const int8_t> orientations, size_t key_size) {
  if (assignments.size() != orientations.size() || assignments.size() != key_size)
    throw std::invalid_argument("edge set mismatch between assignments, orientations and key");
}

SketchConfig make_config(SketchKind kind, std::span<const EdgeHashAssignment> assignments,
                         std::span<const int8_t> orientations, uint32_t width) {
  SketchConfig cfg;
  cfg.kind = kind;
  cfg.width = width;
  cfg.copy = assignments.empty() ? 0 : assignments.front().copy;
  for (const auto& a : assignments) {
    if (a.copy != cfg.copy) throw std::invalid_argument("mixed copy indices in one sketch");
    cfg.edges.push_back(a.edge);
  }
  cfg.orientations.assign(orientations.begin(), orientations.end());
  return cfg;
}

void check_same_config(const SketchVector& a, const SketchVector& b) {
  if (!(a.config == b.config)) throw std::invalid_argument("sketch configuration mismatch");
}

}  // namespace

double SketchVector::total() const {
  double s = 0.0;
  for (double c : counters) s += c;
  return s;
}

uint64_t locate(std::span<const EdgeHashAssignment> assignments,
                std::span<const int8_t> orientations,
                std::span<const int64_t> key, uint32_t width) {
  check_aligned(assignments, orientations, key.size());
  const uint64_t mask = width - 1;
  uint64_t acc = 0;
  for (size_t i = 0; i < assignments.size(); ++i) {
    uint64_t h = eval_location(assignments[i].location, key[i]);
    acc += orientations[i] > 0 ? h : (width - h) & mask;
  }
  return acc & mask;
}

int sign_product(std::span<const EdgeHashAssignment> assignments,
                 std::span<const int64_t> key) {
  if (assignments.size() != key.size())
    throw std::invalid_argument("edge set mismatch between assignments and key");
  int s = 1;
  for (size_t i = 0; i < assignments.size(); ++i)
    s *= eval_sign(assignments[i].sign, key[i]);
  return s;
}

namespace {

template <bool Signed>
SketchVector build_counting(std::span<const std::span<const int64_t>> edge_columns,
                            std::span<const uint32_t> rows,
                            std::span<const EdgeHashAssignment> assignments,
                            std::span<const int8_t> orientations, uint32_t width,
                            BuildStats* stats) {
  check_aligned(assignments, orientations, edge_columns.size());
  if (assignments.empty()) throw std::invalid_argument("sketch needs at least one edge");
  SketchVector out;
  out.config = make_config(Signed ? SketchKind::agms : SketchKind::countmin,
                           assignments, orientations, width);
  out.counters.assign(width, 0.0);
  const uint64_t mask = width - 1;
  std::vector<int64_t> key(edge_columns.size());
  for (uint32_t r : rows) {
    if (stats) ++stats->rows_visited;
    bool null_key = false;
    for (size_t i = 0; i < edge_columns.size(); ++i) {
      key[i] = edge_columns[i][r];
      if (key[i] == kNullCode) null_key = true;
    }
    if (null_key) {
      if (stats) ++stats->rows_skipped_null;
      continue;
    }
    uint64_t acc = 0;
    int sign = 1;
    for (size_t i = 0; i < assignments.size(); ++i) {
      uint64_t h = eval_location(assignments[i].location, key[i]);
      acc += orientations[i] > 0 ? h : (width - h) & mask;
      if constexpr (Signed) sign *= eval_sign(assignments[i].sign, key[i]);
    }
    out.counters[acc & mask] += sign;
  }
  return out;
}

}  // namespace

SketchVector build_agms(std::span<const std::span<const int64_t>> edge_columns,
                        std::span<const uint32_t> rows,
                        std::span<const EdgeHashAssignment> assignments,
                        std::span<const int8_t> orientations, uint32_t width,
                        BuildStats* stats) {
  return build_counting<true>(edge_columns, rows, assignments, orientations, width, stats);
}

SketchVector build_countmin(std::span<const std::span<const int64_t>> edge_columns,
                            std::span<const uint32_t> rows,
                            std::span<const EdgeHashAssignment> assignments,
                            std::span<const int8_t> orientations, uint32_t width,
                            BuildStats* stats) {
  return build_counting<false>(edge_columns, rows, assignments, orientations, width, stats);
}

size_t KeyHash::operator()(const std::vector<int64_t>& key) const {
  uint64_t h = 0x9e3779b97f4a7c15ull;
  for (int64_t v : key) {
    uint64_t x = static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    h ^= (x ^ (x >> 31)) + (h << 6) + (h >> 2);
  }
  return static_cast<size_t>(h);
}

FrequencyTable build_frequency_table(std::span<const std::span<const int64_t>> edge_columns,
                                     std::span<const uint32_t> rows,
                                     bool include_null_keys) {
  FrequencyTable freq;
  std::vector<int64_t> key(edge_columns.size());
  for (uint32_t r : rows) {
    bool null_key = false;
    for (size_t i = 0; i < edge_columns.size(); ++i) {
      key[i] = edge_columns[i][r];
      if (key[i] == kNullCode) null_key = true;
    }
    if (null_key && !include_null_keys) continue;
    ++freq[key];
  }
  return freq;
}

SketchVector build_degree(const FrequencyTable& freq,
                          std::span<const EdgeHashAssignment> assignments,
                          std::span<const int8_t> orientations, uint32_t width) {
  if (assignments.empty()) throw std::invalid_argument("sketch needs at least one edge");
  SketchVector out;
  out.config = make_config(SketchKind::degree, assignments, orientations, width);
  out.counters.assign(width, 0.0);
  for (const auto& [key, count] : freq) {
    uint64_t b = locate(assignments, orientations, key, width);
    out.counters[b] = std::max(out.counters[b], static_cast<double>(count));
  }
  return out;
}

SketchVector add(const SketchVector& a, const SketchVector& b) {
  SketchVector out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(SketchVector& a, const SketchVector& b) {
  check_same_config(a, b);
  for (size_t i = 0; i < a.counters.size(); ++i) a.counters[i] += b.counters[i];
}

SketchVector scale(const SketchVector& a, double c) {
  SketchVector out = a;
  scale_inplace(out, c);
  return out;
}

void scale_inplace(SketchVector& a, double c) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("scale factor must lie in [0,1]");
  for (double& x : a.counters) x *= c;
}

SketchVector clamp_degree(const SketchVector& approx, const SketchVector& exact_root) {
  check_same_config(approx, exact_root);
  SketchVector out = approx;
  for (size_t i = 0; i < out.counters.size(); ++i)
    out.counters[i] = std::min(out.counters[i], exact_root.counters[i]);
  return out;
}

SketchVector reverse_orientation(const SketchVector& s) {
  if (s.config.edges.size() != 1)
    throw std::invalid_argument("orientation reversal is only defined for single-edge sketches");
  SketchVector out;
  out.config = s.config;
  out.config.orientations[0] = static_cast<int8_t>(-s.config.orientations[0]);
  const uint32_t w = s.config.width;
  out.counters.assign(w, 0.0);
  out.counters[0] = s.counters[0];
  for (uint32_t b = 1; b < w; ++b) out.counters[w - b] = s.counters[b];
  return out;
}

}  // namespace sspn
