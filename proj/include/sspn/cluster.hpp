#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sspn {

enum class ClusterMethod : uint8_t { hard_em = 0, kmeans = 1 };

ClusterMethod cluster_method_from_string(const std::string& s);
const char* cluster_method_name(ClusterMethod m);

struct ClusterResult {
  std::vector<uint32_t> blocks[2];  // non-empty two-way row partition
};

// columns[a][row] is the dictionary code of scope attribute a.
// hard-em: naive-Bayes mixture over codes, Laplace alpha=1, hard assignment,
// at most 50 iterations. kmeans: Lloyd's over the RDC sine-feature embedding,
// 2 centroids, 50 iterations. Both deterministic under the seed; a degenerate
// single-cluster outcome falls back to a median split of the
// highest-variance feature.
ClusterResult cluster_rows(std::span<const std::span<const int64_t>> columns,
                           std::span<const uint32_t> rows, ClusterMethod method,
                           uint32_t rdc_features_k, double rdc_scale, uint64_t seed);

}  // namespace sspn
