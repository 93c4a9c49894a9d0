#include "sspn/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "sspn/random.hpp"
#include "sspn/rdc.hpp"

namespace sspn {

ClusterMethod cluster_method_from_string(const std::string& s) {
  if (s == "hard-em") return ClusterMethod::hard_em;
  if (s == "k-means" || s == "kmeans") return ClusterMethod::kmeans;
  throw std::runtime_error("unknown cluster method: " + s);
}

const char* cluster_method_name(ClusterMethod m) {
  return m == ClusterMethod::hard_em ? "hard-em" : "k-means";
}

namespace {

ClusterResult from_assignment(std::span<const uint32_t> rows, const std::vector<uint8_t>& assign) {
  ClusterResult out;
  for (size_t i = 0; i < rows.size(); ++i) out.blocks[assign[i] ? 1 : 0].push_back(rows[i]);
  return out;
}

// split at the median of the highest-variance column; position split when
// even that is degenerate
ClusterResult median_split(std::span<const std::span<const int64_t>> columns,
                           std::span<const uint32_t> rows) {
  size_t best_attr = 0;
  double best_var = -1.0;
  for (size_t a = 0; a < columns.size(); ++a) {
    double mean = 0.0, sq = 0.0;
    for (uint32_t r : rows) {
      double v = static_cast<double>(columns[a][r]);
      mean += v;
      sq += v * v;
    }
    mean /= static_cast<double>(rows.size());
    double var = sq / static_cast<double>(rows.size()) - mean * mean;
    if (var > best_var) {
      best_var = var;
      best_attr = a;
    }
  }
  std::vector<int64_t> values;
  values.reserve(rows.size());
  for (uint32_t r : rows) values.push_back(columns[best_attr][r]);
  std::vector<int64_t> sorted = values;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  int64_t median = sorted[sorted.size() / 2];

  ClusterResult out;
  for (size_t i = 0; i < rows.size(); ++i)
    out.blocks[values[i] < median ? 0 : 1].push_back(rows[i]);
  if (!out.blocks[0].empty() && !out.blocks[1].empty()) return out;

  out.blocks[0].clear();
  out.blocks[1].clear();
  size_t half = (rows.size() + 1) / 2;
  for (size_t i = 0; i < rows.size(); ++i) out.blocks[i < half ? 0 : 1].push_back(rows[i]);
  return out;
}

ClusterResult hard_em(std::span<const std::span<const int64_t>> columns,
                      std::span<const uint32_t> rows, uint64_t seed) {
  const size_t n = rows.size();
  const size_t nattr = columns.size();

  // distinct codes per attribute within this partition (Laplace denominators)
  std::vector<std::unordered_map<int64_t, uint32_t>> code_id(nattr);
  std::vector<std::vector<uint32_t>> row_codes(nattr, std::vector<uint32_t>(n));
  for (size_t a = 0; a < nattr; ++a) {
    for (size_t i = 0; i < n; ++i) {
      auto [it, inserted] =
          code_id[a].try_emplace(columns[a][rows[i]], static_cast<uint32_t>(code_id[a].size()));
      row_codes[a][i] = it->second;
    }
  }

  SplitMix64 rng(seed);
  std::vector<uint8_t> assign(n);
  for (size_t i = 0; i < n; ++i) assign[i] = static_cast<uint8_t>(rng.next() & 1);

  std::vector<std::vector<uint64_t>> counts[2];
  for (int c = 0; c < 2; ++c) {
    counts[c].resize(nattr);
    for (size_t a = 0; a < nattr; ++a) counts[c][a].resize(code_id[a].size());
  }

  for (int iter = 0; iter < 50; ++iter) {
    uint64_t nc[2] = {0, 0};
    for (int c = 0; c < 2; ++c)
      for (size_t a = 0; a < nattr; ++a)
        std::fill(counts[c][a].begin(), counts[c][a].end(), 0);
    for (size_t i = 0; i < n; ++i) {
      int c = assign[i];
      ++nc[c];
      for (size_t a = 0; a < nattr; ++a) ++counts[c][a][row_codes[a][i]];
    }
    if (nc[0] == 0 || nc[1] == 0) break;

    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      double score[2];
      for (int c = 0; c < 2; ++c) {
        double s = std::log(static_cast<double>(nc[c]) / static_cast<double>(n));
        for (size_t a = 0; a < nattr; ++a) {
          double num = static_cast<double>(counts[c][a][row_codes[a][i]]) + 1.0;
          double den = static_cast<double>(nc[c]) + static_cast<double>(code_id[a].size());
          s += std::log(num / den);
        }
        score[c] = s;
      }
      uint8_t next = score[1] > score[0] ? 1 : 0;
      if (next != assign[i]) {
        assign[i] = next;
        changed = true;
      }
    }
    if (!changed) break;
  }

  auto out = from_assignment(rows, assign);
  if (out.blocks[0].empty() || out.blocks[1].empty()) return median_split(columns, rows);
  return out;
}

ClusterResult kmeans(std::span<const std::span<const int64_t>> columns,
                     std::span<const uint32_t> rows, uint32_t k, double s, uint64_t seed) {
  const size_t n = rows.size();
  const size_t nattr = columns.size();
  const size_t dim = nattr * k;

  // per-attribute sine features over the partition's copula ranks
  std::vector<double> embed(n * dim);
  std::vector<int64_t> col(n);
  for (size_t a = 0; a < nattr; ++a) {
    for (size_t i = 0; i < n; ++i) col[i] = columns[a][rows[i]];
    auto phi = rdc_features(col, k, s, mix_seed(seed, 0xfea7u, a));
    for (size_t i = 0; i < n; ++i)
      std::copy(&phi[i * k], &phi[i * k] + k, &embed[i * dim + a * k]);
  }

  SplitMix64 rng(mix_seed(seed, 0x4be5u));
  size_t c0 = static_cast<size_t>(rng.next_below(n));
  size_t c1 = static_cast<size_t>(rng.next_below(n));
  for (int tries = 0; tries < 16 && c1 == c0; ++tries) c1 = static_cast<size_t>(rng.next_below(n));
  std::vector<double> centroid[2];
  centroid[0].assign(&embed[c0 * dim], &embed[c0 * dim] + dim);
  centroid[1].assign(&embed[c1 * dim], &embed[c1 * dim] + dim);

  std::vector<uint8_t> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      double d[2] = {0.0, 0.0};
      for (int c = 0; c < 2; ++c) {
        for (size_t j = 0; j < dim; ++j) {
          double diff = embed[i * dim + j] - centroid[c][j];
          d[c] += diff * diff;
        }
      }
      uint8_t next = d[1] < d[0] ? 1 : 0;
      if (next != assign[i]) {
        assign[i] = next;
        changed = true;
      }
    }
    uint64_t nc[2] = {0, 0};
    std::vector<double> sums[2];
    sums[0].assign(dim, 0.0);
    sums[1].assign(dim, 0.0);
    for (size_t i = 0; i < n; ++i) {
      int c = assign[i];
      ++nc[c];
      for (size_t j = 0; j < dim; ++j) sums[c][j] += embed[i * dim + j];
    }
    if (nc[0] == 0 || nc[1] == 0) break;
    for (int c = 0; c < 2; ++c)
      for (size_t j = 0; j < dim; ++j) centroid[c][j] = sums[c][j] / static_cast<double>(nc[c]);
    if (!changed) break;
  }

  auto out = from_assignment(rows, assign);
  if (out.blocks[0].empty() || out.blocks[1].empty()) return median_split(columns, rows);
  return out;
}

}  // namespace

ClusterResult cluster_rows(std::span<const std::span<const int64_t>> columns,
                           std::span<const uint32_t> rows, ClusterMethod method,
                           uint32_t rdc_features_k, double rdc_scale, uint64_t seed) {
  if (rows.size() < 2) throw std::invalid_argument("clustering needs at least two rows");
  if (columns.empty()) throw std::invalid_argument("clustering needs at least one column");
  return method == ClusterMethod::hard_em
             ? hard_em(columns, rows, seed)
             : kmeans(columns, rows, rdc_features_k, rdc_scale, seed);
}

}  // namespace sspn
