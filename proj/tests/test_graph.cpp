#include <doctest.h>

#include "netspde/errors.hpp"
#include "netspde/graph.hpp"
#include "netspde/rng.hpp"

using namespace netspde;

namespace {

// random connected graph: a spanning tree plus a few extra edges
MetricGraph random_graph(std::uint64_t seed, int n, int extra) {
  const CounterRng rng(seed, 0, 0);
  std::uint64_t slot = 0;
  const auto pick = [&](int hi) {
    return static_cast<int>(std::abs(rng.normal(slot++)) * 1e6) % hi;
  };
  std::vector<std::pair<int, int>> edges;
  for (int v = 2; v <= n; ++v) edges.emplace_back(1 + pick(v - 1), v);
  for (int e = 0; e < extra; ++e) {
    const int a = 1 + pick(n);
    int b = 1 + pick(n);
    if (a == b) b = (b % n) + 1;
    if (a != b) edges.emplace_back(a, b);
  }
  return build_graph(n, edges);
}

}  // namespace

TEST_CASE("build_graph accepts the small references") {
  const MetricGraph p3 = build_graph(3, {{1, 2}, {2, 3}});
  CHECK(p3.n_edges() == 2);
  CHECK(p3.tail(0) == 0);
  CHECK(p3.head(1) == 2);

  const MetricGraph single = build_graph(2, {{1, 2}});
  CHECK(single.n_edges() == 1);

  // parallel edges are fine
  CHECK_NOTHROW(build_graph(2, {{1, 2}, {1, 2}}));
}

TEST_CASE("build_graph rejects invalid input") {
  CHECK_THROWS_AS(build_graph(4, {{1, 2}, {3, 4}}), DisconnectedGraph);
  CHECK_THROWS_AS(build_graph(3, {}), EmptyEdgeList);
  CHECK_THROWS_AS(build_graph(3, {{1, 4}}), InvalidVertexIndex);
  CHECK_THROWS_AS(build_graph(3, {{0, 1}}), InvalidVertexIndex);
  CHECK_THROWS_AS(build_graph(3, {{1, 2}, {2, 2}}), SelfLoopEdge);
  CHECK_THROWS_AS(build_graph(1, {{1, 1}}), InvalidVertexIndex);
}

TEST_CASE("incidence matches the orientation convention") {
  const MetricGraph p3 = build_graph(3, {{1, 2}, {2, 3}});
  const IncidenceMatrices inc = incidence(p3);
  CHECK(inc.phi(0, 0) == 1.0);
  CHECK(inc.phi(1, 0) == -1.0);
  CHECK(inc.phi(2, 0) == 0.0);

  const MetricGraph single = build_graph(2, {{1, 2}});
  const IncidenceMatrices inc1 = incidence(single);
  CHECK(inc1.phi(0, 0) == 1.0);
  CHECK(inc1.phi(1, 0) == -1.0);

  // star with all edges oriented outward: center row of phi_plus all ones
  const MetricGraph star = build_graph(4, {{1, 2}, {1, 3}, {1, 4}});
  const IncidenceMatrices incs = incidence(star);
  CHECK(incs.phi_plus.row(0).sum() == doctest::Approx(3.0));
  CHECK(incs.phi_plus.row(0).minCoeff() == 1.0);
}

TEST_CASE("incident_edges") {
  const MetricGraph p3 = build_graph(3, {{1, 2}, {2, 3}});
  CHECK(incident_edges(p3, 1) == std::vector<int>{0, 1});
  CHECK(incident_edges(p3, 0) == std::vector<int>{0});
  const MetricGraph star = build_graph(4, {{1, 2}, {1, 3}, {1, 4}});
  CHECK(incident_edges(star, 0) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(incident_edges(p3, 3), InvalidVertexIndex);
  CHECK_THROWS_AS(incident_edges(p3, -1), InvalidVertexIndex);
}

TEST_CASE("incidence invariants on random graphs") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const MetricGraph g = random_graph(seed, 2 + static_cast<int>(seed % 5), 2);
    const IncidenceMatrices inc = incidence(g);
    for (int e = 0; e < g.n_edges(); ++e) {
      CHECK(inc.phi_plus.col(e).sum() == doctest::Approx(1.0));
      CHECK(inc.phi_minus.col(e).sum() == doctest::Approx(1.0));
      CHECK(inc.phi.col(e).sum() == doctest::Approx(0.0));
      CHECK(inc.phi.col(e).cwiseAbs().maxCoeff() == 1.0);
    }
    CHECK((inc.phi - (inc.phi_plus - inc.phi_minus)).norm() == 0.0);
    for (int v = 0; v < g.n_vertices; ++v) {
      const auto edges = incident_edges(g, v);
      CHECK(!edges.empty());
      std::vector<int> from_phi;
      for (int e = 0; e < g.n_edges(); ++e)
        if (inc.phi(v, e) != 0.0) from_phi.push_back(e);
      CHECK(edges == from_phi);
    }
  }
}
