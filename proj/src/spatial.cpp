#include "netspde/spatial.hpp"

#include <cmath>
#include <string>

#include "netspde/errors.hpp"

namespace netspde {

namespace {

double endpoint_derivative(const Eigen::Ref<const Vector>& u, double h,
                           bool at_head) {
  const Index n = u.size();
  if (at_head)
    return (3.0 * u(n - 1) - 4.0 * u(n - 2) + u(n - 3)) / (2.0 * h);
  return (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h);
}

}  // namespace

EdgeCoefficient make_edge_coefficient(
    int n_edges, int n_x,
    const std::vector<std::function<double(double)>>& profiles) {
  if (n_x < 3)
    throw ValidationError("grid.n_x must be >= 3, got " + std::to_string(n_x));
  if (static_cast<int>(profiles.size()) != n_edges)
    throw ValidationError("expected " + std::to_string(n_edges) +
                          " coefficient profiles, got " +
                          std::to_string(profiles.size()));
  EdgeCoefficient c;
  c.samples.resize(n_x, n_edges);
  const double h = 1.0 / static_cast<double>(n_x - 1);
  for (int j = 0; j < n_edges; ++j)
    for (int k = 0; k < n_x; ++k) {
      const double v = profiles[static_cast<std::size_t>(j)](k * h);
      if (!(v > 0.0) || !std::isfinite(v))
        throw NonPositiveCoefficient(
            "c_" + std::to_string(j + 1) + "(" + std::to_string(k * h) +
            ") = " + std::to_string(v) + " is not strictly positive");
      c.samples(k, j) = v;
    }
  return c;
}

EdgeCoefficient constant_coefficient(int n_edges, int n_x, double value) {
  return make_edge_coefficient(
      n_edges, n_x,
      std::vector<std::function<double(double)>>(
          static_cast<std::size_t>(n_edges), [value](double) { return value; }));
}

void validate_node_matrix(const NodeMatrixB& b) {
  if (b.b.size() == 0) throw ValidationError("boundary.b is empty");
  for (Index i = 0; i < b.b.size(); ++i) {
    if (!std::isfinite(b.b(i)))
      throw ValidationError("boundary.b[" + std::to_string(i + 1) +
                            "] is not finite");
    if (b.b(i) > 0.0)
      throw ValidationError("boundary.b[" + std::to_string(i + 1) +
                            "] must be <= 0, got " + std::to_string(b.b(i)));
  }
  if (!b.conservative && b.b.minCoeff() >= 0.0)
    throw ValidationError(
        "boundary.b needs at least one strictly negative entry "
        "(set boundary.conservative to allow all-zero b)");
}

Matrix assemble_edge_operator(const EdgeCoefficient& coeff, int edge) {
  const int n_x = coeff.n_x();
  const double h = coeff.h();
  const double h2 = h * h;
  Matrix block = Matrix::Zero(n_x - 2, n_x);
  for (int k = 1; k <= n_x - 2; ++k) {
    const double c_lo = 0.5 * (coeff.samples(k - 1, edge) + coeff.samples(k, edge));
    const double c_hi = 0.5 * (coeff.samples(k, edge) + coeff.samples(k + 1, edge));
    block(k - 1, k - 1) = c_lo / h2;
    block(k - 1, k) = -(c_lo + c_hi) / h2;
    block(k - 1, k + 1) = c_hi / h2;
  }
  return block;
}

AssembledAfrak assemble_a_frak(const MetricGraph& g,
                               const EdgeCoefficient& coeff,
                               const NodeMatrixB& b, bool zero_flux) {
  if (coeff.n_edges() != g.n_edges())
    throw ShapeMismatch("coefficient has " + std::to_string(coeff.n_edges()) +
                        " profiles for " + std::to_string(g.n_edges()) +
                        " edges");
  if (b.b.size() != g.n_vertices)
    throw ShapeMismatch("boundary.b has length " + std::to_string(b.b.size()) +
                        " for " + std::to_string(g.n_vertices) + " vertices");
  validate_node_matrix(b);

  AssembledAfrak out;
  out.n_x = coeff.n_x();
  out.m = g.n_edges();
  out.n = g.n_vertices;
  out.h = coeff.h();

  const int dim = out.dim();
  out.weights.resize(dim);
  out.weights.head(out.n_interior()).setConstant(out.h);
  out.weights.tail(out.n).setOnes();

  // Weighted matrix W*A = -S + diag(b) on node rows; S is the stiffness
  // matrix of the energy form with cell-midpoint coefficients, assembled
  // symmetric, so A inherits exact weighted self-adjointness.
  Matrix wa = Matrix::Zero(dim, dim);
  const auto unknown = [&](int edge, int k) -> Index {
    if (k == 0) return out.node_index(g.tail(edge));
    if (k == out.n_x - 1) return out.node_index(g.head(edge));
    return out.interior_index(edge, k);
  };
  for (int j = 0; j < out.m; ++j) {
    for (int k = 0; k + 1 < out.n_x; ++k) {
      const double gamma =
          0.5 * (coeff.samples(k, j) + coeff.samples(k + 1, j)) / out.h;
      const Index p = unknown(j, k);
      const Index q = unknown(j, k + 1);
      wa(p, p) -= gamma;
      wa(q, q) -= gamma;
      wa(p, q) += gamma;
      wa(q, p) += gamma;
    }
  }
  for (int v = 0; v < out.n; ++v) wa(out.node_index(v), out.node_index(v)) += b.b(v);

  out.a = out.weights.cwiseInverse().asDiagonal() * wa;

  if (zero_flux) {
    for (int v = 0; v < out.n; ++v) {
      const Index row = out.node_index(v);
      out.a.row(row).setZero();
      out.a(row, row) = b.b(v);
    }
  }
  return out;
}

void check_state(const FullState& x, const MetricGraph& g, double tol) {
  if (x.n_edges() != g.n_edges() || x.n_nodes() != g.n_vertices ||
      x.eta.values.cols() != g.n_vertices)
    throw ShapeMismatch("state dimensions do not match the graph");
  if (x.n_x() < 3) throw ShapeMismatch("state needs n_x >= 3");
  if (!x.u.allFinite() || !x.d.allFinite() || !x.eta.values.allFinite())
    throw NonFiniteEntries("state contains non-finite entries");
  for (int j = 0; j < g.n_edges(); ++j) {
    const double lo = x.u(0, j), hi = x.u(x.n_x() - 1, j);
    const double dt0 = x.d(g.tail(j)), dt1 = x.d(g.head(j));
    if (std::abs(lo - dt0) > tol * std::max({1.0, std::abs(lo), std::abs(dt0)}))
      throw TraceMismatch("edge " + std::to_string(j + 1) +
                          " tail sample disagrees with node value");
    if (std::abs(hi - dt1) > tol * std::max({1.0, std::abs(hi), std::abs(dt1)}))
      throw TraceMismatch("edge " + std::to_string(j + 1) +
                          " head sample disagrees with node value");
  }
  const Index last = x.eta.values.rows() - 1;
  for (int v = 0; v < g.n_vertices; ++v) {
    const double e0 = x.eta.values(last, v);
    if (std::abs(e0 - x.d(v)) > tol * std::max(1.0, std::abs(x.d(v))))
      throw TraceMismatch("segment slot theta=0 disagrees with node " +
                          std::to_string(v + 1));
  }
}

void refresh_trace_rows(FullState& x, const MetricGraph& g) {
  for (int j = 0; j < g.n_edges(); ++j) {
    x.u(0, j) = x.d(g.tail(j));
    x.u(x.n_x() - 1, j) = x.d(g.head(j));
  }
}

Vector boundary_trace(const FullState& state, const MetricGraph& g,
                      double tol) {
  Vector trace(g.n_vertices);
  const int last = state.n_x() - 1;
  for (int v = 0; v < g.n_vertices; ++v) {
    bool have = false;
    double value = 0.0;
    for (int j = 0; j < g.n_edges(); ++j) {
      if (g.tail(j) != v && g.head(j) != v) continue;
      // parallel edges contribute both endpoints
      for (int end = 0; end < 2; ++end) {
        const bool is_tail = end == 0;
        if ((is_tail && g.tail(j) != v) || (!is_tail && g.head(j) != v))
          continue;
        const double sample = state.u(is_tail ? 0 : last, j);
        if (!have) {
          value = sample;
          have = true;
        } else if (std::abs(sample - value) >
                   tol * std::max({1.0, std::abs(sample), std::abs(value)})) {
          throw TraceMismatch("vertex " + std::to_string(v + 1) +
                              ": incident endpoint values disagree (" +
                              std::to_string(value) + " vs " +
                              std::to_string(sample) + ")");
        }
      }
    }
    trace(v) = value;
  }
  return trace;
}

Vector flux_operator(const FullState& state, const MetricGraph& g,
                     const EdgeCoefficient& coeff) {
  if (state.n_edges() != g.n_edges() || state.n_x() != coeff.n_x())
    throw ShapeMismatch("state/coefficient dimensions do not match");
  const double h = coeff.h();
  const int last = state.n_x() - 1;
  Vector flux = Vector::Zero(g.n_vertices);
  for (int j = 0; j < g.n_edges(); ++j) {
    const double du0 = endpoint_derivative(state.u.col(j), h, false);
    const double du1 = endpoint_derivative(state.u.col(j), h, true);
    // phi = +1 at the tail, -1 at the head
    flux(g.tail(j)) -= coeff.samples(0, j) * du0;
    flux(g.head(j)) += coeff.samples(last, j) * du1;
  }
  return flux;
}

double form_energy(const FullState& x, const FullState& y,
                   const EdgeCoefficient& coeff, const NodeMatrixB& b,
                   const MetricGraph& g) {
  boundary_trace(x, g);
  boundary_trace(y, g);
  const double h = coeff.h();
  double acc = 0.0;
  for (int j = 0; j < g.n_edges(); ++j)
    for (int k = 0; k + 1 < x.n_x(); ++k) {
      const double c_mid = 0.5 * (coeff.samples(k, j) + coeff.samples(k + 1, j));
      acc += c_mid * (x.u(k + 1, j) - x.u(k, j)) * (y.u(k + 1, j) - y.u(k, j)) / h;
    }
  for (int v = 0; v < g.n_vertices; ++v) acc += b.b(v) * x.d(v) * y.d(v);
  return acc;
}

Vector pack_spatial(const FullState& x, const AssembledAfrak& a) {
  Vector v(a.dim());
  for (int j = 0; j < a.m; ++j)
    for (int k = 1; k <= a.n_x - 2; ++k)
      v(a.interior_index(j, k)) = x.u(k, j);
  v.tail(a.n) = x.d;
  return v;
}

void unpack_spatial(const Vector& v, const AssembledAfrak& a,
                    const MetricGraph& g, FullState& x) {
  if (v.size() != a.dim()) throw ShapeMismatch("spatial vector size mismatch");
  for (int j = 0; j < a.m; ++j)
    for (int k = 1; k <= a.n_x - 2; ++k)
      x.u(k, j) = v(a.interior_index(j, k));
  x.d = v.tail(a.n);
  refresh_trace_rows(x, g);
}

}  // namespace netspde
