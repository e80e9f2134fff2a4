#pragma once

#include "netspde/graph.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Sliding history window of the node values over [-r, 0], sampled on
/// N_theta+1 equispaced slots. Row l holds theta_l = -r + l*dtheta, so the
/// last row is theta = 0 and must always equal the current node vector.
struct SegmentBuffer {
  Matrix values;  // (n_theta+1) x n, column per node
  double r = 1.0;

  int n_slots() const { return static_cast<int>(values.rows()); }
  int n_theta() const { return n_slots() - 1; }
  double dtheta() const { return r / static_cast<double>(n_theta()); }
};

/// Full discretized state X = (u, d, eta): edge profiles on the grid of
/// [0,1], node values, and the per-node delay segment.
///
/// Invariants (checked by check_state):
///  - trace compatibility: u_j(0) = d[tail(j)], u_j(1) = d[head(j)];
///  - segment alignment: eta(theta=0) = d;
///  - all entries finite.
struct FullState {
  Matrix u;  // n_x x m, column per edge
  Vector d;  // n
  SegmentBuffer eta;

  int n_x() const { return static_cast<int>(u.rows()); }
  int n_edges() const { return static_cast<int>(u.cols()); }
  int n_nodes() const { return static_cast<int>(d.size()); }
};

/// Throws TraceMismatch / ShapeMismatch / NonFiniteEntries if an invariant
/// fails. `tol` is the absolute tolerance of the endpoint comparisons.
void check_state(const FullState& x, const MetricGraph& g, double tol = 1e-12);

/// Rewrites the endpoint samples of every edge from the node values.
void refresh_trace_rows(FullState& x, const MetricGraph& g);

}  // namespace netspde
