#include "netspde/semigroup.hpp"

#include <cmath>
#include <vector>

#include "netspde/errors.hpp"

namespace netspde {

Matrix expm(const Matrix& m, double t) {
  if (m.rows() != m.cols()) throw ShapeMismatch("expm needs a square matrix");
  if (!m.allFinite() || !std::isfinite(t))
    throw NonFiniteEntries("expm input has non-finite entries");
  if (t < 0.0) throw ValidationError("expm expects t >= 0");

  const Index n = m.rows();
  Matrix a = t * m;

  // Pade(13,13) with norm-based scaling (theta_13 of the standard
  // scaling-and-squaring analysis).
  static const double kTheta13 = 5.371920351148152;
  static const double kB[] = {64764752532480000.0, 32382376266240000.0,
                              7771770303897600.0,  1187353796428800.0,
                              129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,
                              1323241920.0,        40840800.0,
                              960960.0,            16380.0,
                              182.0,               1.0};

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    a /= std::ldexp(1.0, squarings);
  }

  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u =
      a * (a6 * (kB[13] * a6 + kB[11] * a4 + kB[9] * a2) + kB[7] * a6 +
           kB[5] * a4 + kB[3] * a2 + kB[1] * ident);
  const Matrix v = a6 * (kB[12] * a6 + kB[10] * a4 + kB[8] * a2) +
                   kB[6] * a6 + kB[4] * a4 + kB[2] * a2 + kB[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  if (!r.allFinite()) throw NonFiniteEntries("expm produced non-finite output");
  return r;
}

double spectral_abscissa(const Matrix& m) {
  if (m.rows() != m.cols())
    throw ShapeMismatch("spectral_abscissa needs a square matrix");
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw EigenFailure("eigenvalue computation did not converge");
  return solver.eigenvalues().real().maxCoeff();
}

double weighted_operator_norm(const Matrix& m, const Vector& w) {
  if (m.rows() != w.size())
    throw ShapeMismatch("weight vector does not match matrix dimension");
  const Vector sqrt_w = w.cwiseSqrt();
  const Matrix scaled = sqrt_w.asDiagonal() * m *
                        sqrt_w.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(scaled.transpose() * scaled,
                                               Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw EigenFailure("norm computation did not converge");
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

double weighted_symmetry_residual(const Matrix& m, const Vector& w) {
  const Matrix wm = w.asDiagonal() * m;
  const double denom = wm.norm();
  if (denom == 0.0) return 0.0;
  return (wm - wm.transpose()).norm() / denom;
}

SemigroupOperator explicit_unperturbed(double t, const AssembledAfrak& a,
                                       const NodeMatrixB& b, int n_theta,
                                       double r) {
  if (t < 0.0) throw ValidationError("explicit_unperturbed expects t >= 0");
  const double dtheta = r / static_cast<double>(n_theta);
  const int shift = slots_for_step(t, dtheta);

  const int d_a = a.dim();
  const int slots = n_theta + 1;
  const int dim = d_a + a.n * slots;

  SemigroupOperator out;
  out.t = t;
  out.provenance = SemigroupOperator::Provenance::ExplicitBlocks;
  out.op = Matrix::Zero(dim, dim);
  out.op.topLeftCorner(d_a, d_a) = expm(a.a, t);

  const auto seg = [&](int v, int l) -> Index {
    return static_cast<Index>(d_a) + v * slots + l;
  };
  for (int v = 0; v < a.n; ++v) {
    for (int l = 0; l < slots; ++l) {
      const double theta = -r + l * dtheta;
      if (l + shift < slots) {
        // history transport: slot l reads eta0(theta + t)
        out.op(seg(v, l), seg(v, l + shift)) = 1.0;
      } else {
        // filled from the node value: e^{(t+theta) b} d
        out.op(seg(v, l), a.node_index(v)) = std::exp((t + theta) * b.b(v));
      }
    }
  }
  return out;
}

SemigroupOperator dyson_phillips(const BlockGenerator& gen, double t,
                                 int n_terms) {
  if (t < 0.0 || n_terms < 0)
    throw ValidationError("dyson_phillips expects t >= 0 and n_terms >= 0");
  const double dtheta = gen.dtheta();
  const int steps = slots_for_step(t, dtheta);

  SemigroupOperator out;
  out.t = t;
  out.provenance = SemigroupOperator::Provenance::DysonPhillips;
  out.dp_terms = n_terms;

  const int dim = gen.dim();
  const int n = gen.spatial.n;

  // T0 on the time grid, via the exact semigroup property of expm
  std::vector<Matrix> t0(static_cast<std::size_t>(steps) + 1);
  t0[0] = Matrix::Identity(dim, dim);
  if (steps > 0) {
    const Matrix e_step = expm(gen.a0, dtheta);
    for (int k = 1; k <= steps; ++k) t0[k] = t0[k - 1] * e_step;
  }
  out.op = t0[static_cast<std::size_t>(steps)];
  if (n_terms == 0 || steps == 0) return out;

  // A1 = P * Q with P the indicator of the node rows (dim x n) and Q the
  // delay quadrature weights (n x dim); the recursion only ever needs
  // dim x n and n x n products.
  Matrix p = Matrix::Zero(dim, n);
  for (int v = 0; v < n; ++v) p(gen.spatial.node_index(v), v) = 1.0;
  Matrix q = Matrix::Zero(n, dim);
  for (int v = 0; v < n; ++v)
    q.row(v) = gen.a1.row(gen.spatial.node_index(v));

  std::vector<Matrix> q_t0(static_cast<std::size_t>(steps) + 1);  // n x dim
  std::vector<Matrix> m_small(static_cast<std::size_t>(steps) + 1);  // n x n
  for (int k = 0; k <= steps; ++k) {
    q_t0[k] = q * t0[k];
    m_small[k] = q_t0[k] * p;
  }

  // r_prev[k] = T^{n-1}(t_k) * P  (dim x n), trapezoid in time
  std::vector<Matrix> r_prev(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) r_prev[k] = t0[k] * p;

  for (int term = 1; term <= n_terms; ++term) {
    // full-size contribution of this term at time t
    Matrix contrib = Matrix::Zero(dim, dim);
    for (int j = 0; j <= steps; ++j) {
      const double w = dtheta * ((j == 0 || j == steps) ? 0.5 : 1.0);
      contrib.noalias() += w * (r_prev[steps - j] * q_t0[j]);
    }
    out.op += contrib;
    if (term == n_terms) break;

    std::vector<Matrix> r_next(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
      Matrix acc = Matrix::Zero(dim, n);
      // the convolution over [0, t_k] vanishes for k = 0
      for (int j = 0; k > 0 && j <= k; ++j) {
        const double w = dtheta * ((j == 0 || j == k) ? 0.5 : 1.0);
        acc.noalias() += w * (r_prev[k - j] * m_small[j]);
      }
      r_next[k] = std::move(acc);
    }
    r_prev = std::move(r_next);
  }
  return out;
}

double check_semigroup_property(const BlockGenerator& gen, double t,
                                double s) {
  if (t < 0.0 || s < 0.0)
    throw ValidationError("check_semigroup_property expects t, s >= 0");
  slots_for_step(t, gen.dtheta());
  slots_for_step(s, gen.dtheta());
  const Matrix a = gen.a();
  const Matrix both = expm(a, t + s);
  const Matrix split = expm(a, t) * expm(a, s);
  const double denom = weighted_operator_norm(both, gen.weights);
  if (denom == 0.0) return 0.0;
  return weighted_operator_norm(both - split, gen.weights) / denom;
}

}  // namespace netspde
