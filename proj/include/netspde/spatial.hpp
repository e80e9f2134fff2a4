#pragma once

#include <functional>
#include <vector>

#include "netspde/graph.hpp"
#include "netspde/state.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Diffusion coefficients c_j sampled on the uniform edge grid
/// x_k = k*h, h = 1/(n_x-1). All samples must be strictly positive.
struct EdgeCoefficient {
  Matrix samples;  // n_x x m, column per edge
  int n_x() const { return static_cast<int>(samples.rows()); }
  int n_edges() const { return static_cast<int>(samples.cols()); }
  double h() const { return 1.0 / static_cast<double>(n_x() - 1); }
};

EdgeCoefficient make_edge_coefficient(
    int n_edges, int n_x,
    const std::vector<std::function<double(double)>>& profiles);

/// Convenience: c_j == value on every edge.
EdgeCoefficient constant_coefficient(int n_edges, int n_x, double value);

/// Diagonal node matrix B. All entries must be <= 0; unless `conservative`
/// is set, at least one entry must be strictly negative.
struct NodeMatrixB {
  Vector b;
  bool conservative = false;
};

void validate_node_matrix(const NodeMatrixB& b);

/// Assembled generator block acting on (interior edge samples, node values).
/// The matrix is self-adjoint w.r.t. the diagonal inner product with weight h
/// on interior entries and 1 on node entries, and dissipative.
struct AssembledAfrak {
  Matrix a;        // D_a x D_a
  Vector weights;  // D_a, diagonal of the inner product
  int n_x = 0;
  int m = 0;  // edges
  int n = 0;  // vertices
  double h = 0.0;

  int n_interior() const { return m * (n_x - 2); }
  int dim() const { return n_interior() + n; }
  Index interior_index(int edge, int k) const {
    // k is the grid index in [1, n_x-2]
    return static_cast<Index>(edge) * (n_x - 2) + (k - 1);
  }
  Index node_index(int v) const {
    return static_cast<Index>(n_interior()) + v;
  }
};

/// Per-edge interior discretization of u -> (c u')'. Returns the
/// (n_x-2) x n_x block acting on the full edge samples (endpoint columns
/// couple to the node unknowns): row k carries
/// [c_{k-1/2}, -(c_{k-1/2}+c_{k+1/2}), c_{k+1/2}] / h^2
/// with c_{k+-1/2} the average of the adjacent coefficient samples.
Matrix assemble_edge_operator(const EdgeCoefficient& coeff, int edge);

/// Assembles the full (interior, node) generator. The node rows carry the
/// conservative flux differences that make the matrix exactly symmetric in
/// the weighted inner product, plus the diagonal b term. `zero_flux` is a
/// test mode that drops the flux coupling from the node rows (the node
/// dynamics reduce to d' = b d, plus the delay term once assembled into the
/// full generator).
AssembledAfrak assemble_a_frak(const MetricGraph& g,
                               const EdgeCoefficient& coeff,
                               const NodeMatrixB& b, bool zero_flux = false);

/// Common endpoint value of the incident edges at every vertex. Throws
/// TraceMismatch when two incident endpoints disagree beyond `tol`.
Vector boundary_trace(const FullState& state, const MetricGraph& g,
                      double tol = 1e-12);

/// Node flux functional -sum_j phi_{alpha,j} c_j(v_alpha) u_j'(v_alpha),
/// with one-sided 3-point endpoint derivatives. Note the orientation: this
/// is the negative of the flux difference that enters the node rows of
/// assemble_a_frak.
Vector flux_operator(const FullState& state, const MetricGraph& g,
                     const EdgeCoefficient& coeff);

/// Energy form  sum_j int c_j u_j' v_j' dx + sum_alpha b_alpha d^alpha
/// h^alpha, cell-midpoint quadrature on the gradients. Symmetric in (x, y).
double form_energy(const FullState& x, const FullState& y,
                   const EdgeCoefficient& coeff, const NodeMatrixB& b,
                   const MetricGraph& g);

/// Packs (interior samples, node values) into a D_a vector.
Vector pack_spatial(const FullState& x, const AssembledAfrak& a);

/// Writes a D_a vector back into the state and refreshes the endpoint
/// samples from the node values.
void unpack_spatial(const Vector& v, const AssembledAfrak& a,
                    const MetricGraph& g, FullState& x);

}  // namespace netspde
