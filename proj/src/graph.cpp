#include "netspde/graph.hpp"

#include <queue>
#include <string>

#include "netspde/errors.hpp"

namespace netspde {

MetricGraph build_graph(int n_vertices,
                        const std::vector<std::pair<int, int>>& edges_1based) {
  if (n_vertices < 2)
    throw InvalidVertexIndex("graph needs at least 2 vertices, got " +
                             std::to_string(n_vertices));
  if (edges_1based.empty()) throw EmptyEdgeList("graph has no edges");

  MetricGraph g;
  g.n_vertices = n_vertices;
  g.edges.reserve(edges_1based.size());
  for (std::size_t i = 0; i < edges_1based.size(); ++i) {
    const auto [a, b] = edges_1based[i];
    if (a < 1 || a > n_vertices || b < 1 || b > n_vertices)
      throw InvalidVertexIndex("edge " + std::to_string(i + 1) +
                               " references vertex outside [1," +
                               std::to_string(n_vertices) + "]");
    if (a == b)
      throw SelfLoopEdge("edge " + std::to_string(i + 1) +
                         " is a self-loop at vertex " + std::to_string(a));
    g.edges.emplace_back(a - 1, b - 1);
  }

  // connectivity, orientation ignored
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_vertices));
  for (const auto& [t, h] : g.edges) {
    adj[static_cast<std::size_t>(t)].push_back(h);
    adj[static_cast<std::size_t>(h)].push_back(t);
  }
  std::vector<char> seen(static_cast<std::size_t>(n_vertices), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        q.push(w);
      }
    }
  }
  if (reached != n_vertices)
    throw DisconnectedGraph("graph is not connected (" +
                            std::to_string(reached) + " of " +
                            std::to_string(n_vertices) +
                            " vertices reachable)");
  return g;
}

IncidenceMatrices incidence(const MetricGraph& g) {
  const int n = g.n_vertices;
  const int m = g.n_edges();
  IncidenceMatrices inc;
  inc.phi_plus = Matrix::Zero(n, m);
  inc.phi_minus = Matrix::Zero(n, m);
  for (int e = 0; e < m; ++e) {
    inc.phi_plus(g.tail(e), e) = 1.0;
    inc.phi_minus(g.head(e), e) = 1.0;
  }
  inc.phi = inc.phi_plus - inc.phi_minus;
  return inc;
}

std::vector<int> incident_edges(const MetricGraph& g, int vertex) {
  if (vertex < 0 || vertex >= g.n_vertices)
    throw InvalidVertexIndex("vertex index " + std::to_string(vertex) +
                             " outside [0," + std::to_string(g.n_vertices - 1) +
                             "]");
  std::vector<int> out;
  for (int e = 0; e < g.n_edges(); ++e)
    if (g.tail(e) == vertex || g.head(e) == vertex) out.push_back(e);
  return out;
}

}  // namespace netspde
