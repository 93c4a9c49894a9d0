#include "sspn/estimator.hpp"

#include <algorithm>
#include <complex>
#include <set>
#include <stdexcept>

#include "sspn/dft.hpp"

namespace sspn {

std::vector<uint32_t> JoinGraph::incident_edges(uint32_t vertex) const {
  std::vector<uint32_t> out;
  for (const auto& e : edges)
    if (e.u == vertex || e.v == vertex) out.push_back(e.edge);
  std::sort(out.begin(), out.end());
  return out;
}

void validate_join_graph(const JoinGraph& g) {
  if (g.vertex_count == 0) throw std::invalid_argument("join graph has no vertices");
  if (g.edges.empty() && g.vertex_count > 1)
    throw std::invalid_argument("join graph is disconnected");

  // union-find over vertices; a bundle is the set of parallel edges of a pair
  std::vector<uint32_t> parent(g.vertex_count);
  for (uint32_t i = 0; i < g.vertex_count; ++i) parent[i] = i;
  auto find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::set<std::pair<uint32_t, uint32_t>> bundles;
  for (const auto& e : g.edges) {
    if (e.u >= g.vertex_count || e.v >= g.vertex_count)
      throw std::invalid_argument("join edge references an unknown vertex");
    auto pair = std::minmax(e.u, e.v);
    if (!bundles.insert({pair.first, pair.second}).second) continue;
    uint32_t ru = find(e.u), rv = find(e.v);
    if (ru == rv) throw std::invalid_argument("cyclic join graphs are not supported");
    parent[ru] = rv;
  }
  uint32_t root = find(0);
  for (uint32_t i = 1; i < g.vertex_count; ++i)
    if (find(i) != root) throw std::invalid_argument("join graph is disconnected");
}

namespace {

void check_sketches(std::span<const SketchVector* const> sketches, const JoinGraph& g) {
  if (sketches.size() != g.vertex_count)
    throw std::invalid_argument("one sketch required per join-graph vertex");
  const uint32_t w = sketches[0]->config.width;
  const uint32_t copy = sketches[0]->config.copy;
  for (const auto* s : sketches) {
    if (s->config.width != w) throw std::invalid_argument("sketch width mismatch");
    if (s->config.copy != copy) throw std::invalid_argument("sketch copy mismatch");
  }
  for (uint32_t v = 0; v < g.vertex_count; ++v) {
    if (sketches[v]->config.edges != g.incident_edges(v))
      throw std::invalid_argument("sketch edge subset differs from the vertex's incident edges");
  }
  // every edge must be oppositely oriented at its two endpoints
  for (const auto& e : g.edges) {
    int prod = 1;
    for (uint32_t v : {e.u, e.v}) {
      const auto& cfg = sketches[v]->config;
      auto it = std::find(cfg.edges.begin(), cfg.edges.end(), e.edge);
      prod *= cfg.orientations[static_cast<size_t>(it - cfg.edges.begin())];
    }
    if (prod != -1)
      throw std::invalid_argument("edge endpoints must carry opposite orientations");
  }
}

double phase_zero_product(std::span<const SketchVector* const> sketches, uint32_t w) {
  std::vector<std::complex<double>> acc;
  for (size_t v = 0; v < sketches.size(); ++v) {
    auto f = dft(sketches[v]->counters);
    if (v == 0) {
      acc = std::move(f);
    } else {
      for (uint32_t k = 0; k < w; ++k) acc[k] *= f[k];
    }
  }
  std::complex<double> sum(0.0, 0.0);
  for (uint32_t k = 0; k < w; ++k) sum += acc[k];
  return sum.real() / static_cast<double>(w);
}

}  // namespace

double contract(std::span<const SketchVector* const> vertex_sketches, const JoinGraph& g) {
  validate_join_graph(g);
  check_sketches(vertex_sketches, g);
  for (const auto* s : vertex_sketches)
    if (s->config.kind != SketchKind::agms)
      throw std::invalid_argument("contract expects agms sketches");
  return phase_zero_product(vertex_sketches, vertex_sketches[0]->config.width);
}

double contract_bound(std::span<const SketchVector* const> countmin_sketches,
                      std::span<const SketchVector* const> degree_sketches,
                      const JoinGraph& g, uint32_t countmin_vertex) {
  validate_join_graph(g);
  check_sketches(countmin_sketches, g);
  check_sketches(degree_sketches, g);
  if (countmin_vertex >= g.vertex_count)
    throw std::invalid_argument("countmin vertex out of range");
  std::vector<const SketchVector*> chosen(g.vertex_count);
  for (uint32_t v = 0; v < g.vertex_count; ++v)
    chosen[v] = v == countmin_vertex ? countmin_sketches[v] : degree_sketches[v];
  double est = phase_zero_product(chosen, chosen[0]->config.width);
  return est < 0.0 ? 0.0 : est;
}

double bound_estimate(std::span<const SketchVector* const> countmin_sketches,
                      std::span<const SketchVector* const> degree_sketches,
                      const JoinGraph& g) {
  double best = 0.0;
  for (uint32_t v = 0; v < g.vertex_count; ++v) {
    double est = contract_bound(countmin_sketches, degree_sketches, g, v);
    best = v == 0 ? est : std::min(best, est);
  }
  return best;
}

double combine_estimates(std::span<const double> estimates, Variant variant) {
  if (estimates.empty()) throw std::invalid_argument("no estimates to combine");
  std::vector<double> sorted(estimates.begin(), estimates.end());
  std::sort(sorted.begin(), sorted.end());
  double out = 0.0;
  switch (variant) {
    case Variant::fagms_median: {
      size_t n = sorted.size();
      out = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      break;
    }
    case Variant::fagms_max:
      out = sorted.back();
      break;
    case Variant::bound:
      out = sorted.front();
      break;
  }
  return std::max(out, 1.0);
}

}  // namespace sspn
