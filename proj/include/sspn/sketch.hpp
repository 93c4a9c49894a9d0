#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "sspn/hashing.hpp"

namespace sspn {

inline constexpr int64_t kNullCode = -1;

enum class SketchKind : uint8_t { agms = 0, countmin = 1, degree = 2 };

struct SketchConfig {
  SketchKind kind = SketchKind::agms;
  uint32_t width = 0;
  uint32_t copy = 0;
  std::vector<uint32_t> edges;        // join-schema edge indices, ascending
  std::vector<int8_t> orientations;   // +1 / -1, aligned with edges
  bool operator==(const SketchConfig&) const = default;
};

// w real counters plus the hash configuration that produced them.
// agms counters are signed; countmin and degree counters are nonnegative.
struct SketchVector {
  SketchConfig config;
  std::vector<double> counters;

  double total() const;
};

struct BuildStats {
  uint64_t rows_visited = 0;
  uint64_t rows_skipped_null = 0;
};

// Composite oriented bucket: (sum_e orientation_e * h_e(key_e)) mod width.
uint64_t locate(std::span<const EdgeHashAssignment> assignments,
                std::span<const int8_t> orientations,
                std::span<const int64_t> key, uint32_t width);

// Product of xi_e(key_e) over the edge subset; +1 for an empty subset.
int sign_product(std::span<const EdgeHashAssignment> assignments,
                 std::span<const int64_t> key);

// Single-pass builders over a row partition. edge_columns[k][row] holds the
// encoded value of edge k's attribute; kNullCode rows are skipped (a null
// never equi-joins) and counted in stats.
SketchVector build_agms(std::span<const std::span<const int64_t>> edge_columns,
                        std::span<const uint32_t> rows,
                        std::span<const EdgeHashAssignment> assignments,
                        std::span<const int8_t> orientations, uint32_t width,
                        BuildStats* stats = nullptr);

SketchVector build_countmin(std::span<const std::span<const int64_t>> edge_columns,
                            std::span<const uint32_t> rows,
                            std::span<const EdgeHashAssignment> assignments,
                            std::span<const int8_t> orientations, uint32_t width,
                            BuildStats* stats = nullptr);

struct KeyHash {
  size_t operator()(const std::vector<int64_t>& key) const;
};

// composite join key -> count within one partition
using FrequencyTable = std::unordered_map<std::vector<int64_t>, int64_t, KeyHash>;

FrequencyTable build_frequency_table(std::span<const std::span<const int64_t>> edge_columns,
                                     std::span<const uint32_t> rows,
                                     bool include_null_keys = false);

// counter[b] = max frequency of any key hashing to bucket b; 0 when empty.
SketchVector build_degree(const FrequencyTable& freq,
                          std::span<const EdgeHashAssignment> assignments,
                          std::span<const int8_t> orientations, uint32_t width);

SketchVector add(const SketchVector& a, const SketchVector& b);
void add_inplace(SketchVector& a, const SketchVector& b);
SketchVector scale(const SketchVector& a, double c);
void scale_inplace(SketchVector& a, double c);

// Element-wise min against the unfiltered relation's exact degree sketch.
SketchVector clamp_degree(const SketchVector& approx, const SketchVector& exact_root);

// The same multiset re-addressed at the opposite orientation: counters
// re-indexed by b -> (w - b) mod w. Only defined for single-edge sketches.
SketchVector reverse_orientation(const SketchVector& s);

}  // namespace sspn
