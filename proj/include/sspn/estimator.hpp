#pragma once

#include <span>
#include <vector>

#include "sspn/sketch.hpp"

namespace sspn {

enum class Variant : uint8_t { fagms_median = 0, fagms_max = 1, bound = 2 };
enum class NodeMode : uint8_t { product = 0, min_product = 1 };

// One equi-join predicate of a concrete query: vertices are relation
// instances, edge refers to the declared join-schema edge.
struct JoinGraphEdge {
  uint32_t u = 0;
  uint32_t v = 0;
  uint32_t edge = 0;
};

struct JoinGraph {
  uint32_t vertex_count = 0;
  std::vector<JoinGraphEdge> edges;

  std::vector<uint32_t> incident_edges(uint32_t vertex) const;
};

// Requires a connected graph whose de-duplicated vertex pairs form a tree.
// Parallel edges between one vertex pair (composite joins) are allowed.
void validate_join_graph(const JoinGraph& g);

// Cross-correlation contraction: Re((1/w) * sum_k prod_v DFT(s_v)[k]).
// Each edge contributes +h at one endpoint and -h at the other, so matching
// tuples land at total phase 0 and count with sign +1.
double contract(std::span<const SketchVector* const> vertex_sketches, const JoinGraph& g);

// Same contraction over countmin/degree sketches with one chosen vertex
// supplying its countmin sketch; all others use their degree sketches.
double contract_bound(std::span<const SketchVector* const> countmin_sketches,
                      std::span<const SketchVector* const> degree_sketches,
                      const JoinGraph& g, uint32_t countmin_vertex);

// min over all countmin-position choices
double bound_estimate(std::span<const SketchVector* const> countmin_sketches,
                      std::span<const SketchVector* const> degree_sketches,
                      const JoinGraph& g);

// fagms-median -> median (mean of middle two for even d); fagms-max -> max;
// bound -> min. Result floored at 1.0.
double combine_estimates(std::span<const double> estimates, Variant variant);

}  // namespace sspn
