#pragma once

#include <string>

#include "netspde/delay.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Dense approximation of a semigroup operator at a fixed time, with the
/// construction route recorded.
struct SemigroupOperator {
  Matrix op;
  double t = 0.0;
  enum class Provenance { Expm, ExplicitBlocks, DysonPhillips } provenance =
      Provenance::Expm;
  int dp_terms = -1;  // only meaningful for DysonPhillips
};

/// Scaling-and-squaring matrix exponential of t*M, diagonal Pade order 13
/// with 1-norm based scaling.
Matrix expm(const Matrix& m, double t = 1.0);

/// Largest real part of the eigenvalues.
double spectral_abscissa(const Matrix& m);

/// Operator 2-norm in the geometry induced by the diagonal weights w:
/// |W^{1/2} M W^{-1/2}|_2.
double weighted_operator_norm(const Matrix& m, const Vector& w);

/// Relative symmetry residual of M w.r.t. the weighted inner product:
/// |WM - (WM)^T| / |WM| (Frobenius).
double weighted_symmetry_residual(const Matrix& m, const Vector& w);

/// Unperturbed semigroup at a grid-aligned time t, assembled block-wise:
/// expm of the spatial block on (interior, nodes); the exact slot shift with
/// zero fill on the segment-to-segment block (identically zero once t > r);
/// and e^{(t+theta)B} on the node-to-segment block for theta > -t.
SemigroupOperator explicit_unperturbed(double t, const AssembledAfrak& a,
                                       const NodeMatrixB& b, int n_theta,
                                       double r);

/// Truncated perturbation series sum_{k<=n_terms} T^k(t), where
/// T^0(t) = e^{t A0} and T^k(t) = int_0^t T^{k-1}(t-s) A1 T^0(s) ds with
/// composite trapezoid quadrature at the delay-grid step. The unperturbed
/// factor is evaluated through the matrix exponential of A0 so that the
/// series converges to expm(A0+A1, t) up to quadrature error.
SemigroupOperator dyson_phillips(const BlockGenerator& gen, double t,
                                 int n_terms);

/// |T(t+s) - T(t) T(s)| / |T(t+s)| in the weighted norm, with T evaluated
/// via expm of the full generator.
double check_semigroup_property(const BlockGenerator& gen, double t, double s);

}  // namespace netspde
