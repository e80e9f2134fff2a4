#pragma once

#include <utility>
#include <vector>

#include "netspde/types.hpp"

namespace netspde {

/// Finite connected metric graph. Every edge is identified with the interval
/// [0,1], tail at x=0 and head at x=1. Indices are 0-based in memory; config
/// files and logs use 1-based indices.
///
/// Immutable after construction (only build_graph creates valid instances);
/// safe to share across threads.
struct MetricGraph {
  int n_vertices = 0;
  std::vector<std::pair<int, int>> edges;  // (tail, head), 0-based

  int n_edges() const { return static_cast<int>(edges.size()); }
  int tail(int e) const { return edges[static_cast<std::size_t>(e)].first; }
  int head(int e) const { return edges[static_cast<std::size_t>(e)].second; }
};

/// Incidence matrices, n x m. phi_plus marks the tail e_i(0) of each edge,
/// phi_minus the head e_i(1), phi = phi_plus - phi_minus.
struct IncidenceMatrices {
  Matrix phi_plus;
  Matrix phi_minus;
  Matrix phi;
};

/// Validates and builds a graph from 1-based vertex pairs (the convention of
/// config files). Rejects empty edge lists, out-of-range indices, self-loops
/// and disconnected graphs. Parallel edges are allowed.
MetricGraph build_graph(int n_vertices,
                        const std::vector<std::pair<int, int>>& edges_1based);

IncidenceMatrices incidence(const MetricGraph& g);

/// Indices of the edges incident to `vertex` (0-based), in increasing order.
std::vector<int> incident_edges(const MetricGraph& g, int vertex);

}  // namespace netspde
