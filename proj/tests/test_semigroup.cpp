#include <doctest.h>

#include <cmath>

#include "netspde/errors.hpp"
#include "netspde/rng.hpp"
#include "netspde/semigroup.hpp"

using namespace netspde;

namespace {

struct P3Setup {
  MetricGraph g = build_graph(3, {{1, 2}, {2, 3}});
  EdgeCoefficient c;
  NodeMatrixB b;
  AssembledAfrak a;
  P3Setup(int n_x, double b0) {
    c = constant_coefficient(2, n_x, 1.0);
    b.b = Vector::Zero(3);
    b.b(0) = b0;
    b.conservative = b0 == 0.0;
    a = assemble_a_frak(g, c, b);
  }
};

}  // namespace

TEST_CASE("expm basics") {
  Matrix scalar(1, 1);
  scalar << -1.0;
  CHECK(expm(scalar, 1.0)(0, 0) == doctest::Approx(std::exp(-1.0)));

  const Matrix zero = Matrix::Zero(4, 4);
  CHECK((expm(zero, 3.0) - Matrix::Identity(4, 4)).norm() == 0.0);

  Matrix nil(2, 2);
  nil << 0.0, 1.0, 0.0, 0.0;
  const Matrix en = expm(nil, 1.0);
  CHECK(en(0, 0) == doctest::Approx(1.0));
  CHECK(en(0, 1) == doctest::Approx(1.0));
  CHECK(en(1, 0) == doctest::Approx(0.0));
  CHECK(en(1, 1) == doctest::Approx(1.0));

  Matrix bad(2, 2);
  bad.setConstant(std::nan(""));
  CHECK_THROWS_AS(expm(bad, 1.0), NonFiniteEntries);
}

TEST_CASE("expm matches the eigendecomposition on symmetric input") {
  const CounterRng rng(5, 5, 5);
  std::uint64_t slot = 0;
  Matrix m(20, 20);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(slot++);
  m = 0.5 * (m + m.transpose()).eval();
  m *= 2.0;  // force the scaling path
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Matrix oracle = es.eigenvectors() *
                        es.eigenvalues().array().exp().matrix().asDiagonal() *
                        es.eigenvectors().transpose();
  CHECK((expm(m, 1.0) - oracle).norm() < 1e-11 * oracle.norm());
}

TEST_CASE("spectral abscissa") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -1.0;
  d(1, 1) = -2.0;
  CHECK(spectral_abscissa(d) == doctest::Approx(-1.0));
  CHECK(spectral_abscissa(Matrix::Zero(3, 3)) == doctest::Approx(0.0));

  const P3Setup s(11, -1.0);
  CHECK(spectral_abscissa(s.a.a) < -1e-4);
}

TEST_CASE("explicit unperturbed blocks") {
  const P3Setup s(11, -1.0);
  const int n_theta = 16;
  const double r = 1.0;
  const int d_a = s.a.dim();

  SUBCASE("t = 0 is the identity") {
    const SemigroupOperator op = explicit_unperturbed(0.0, s.a, s.b, n_theta, r);
    CHECK((op.op - Matrix::Identity(op.op.rows(), op.op.cols())).norm() <
          1e-12);
  }

  SUBCASE("spatial block is the matrix exponential") {
    const SemigroupOperator op = explicit_unperturbed(0.5, s.a, s.b, n_theta, r);
    CHECK((op.op.topLeftCorner(d_a, d_a) - expm(s.a.a, 0.5)).norm() == 0.0);
  }

  SUBCASE("segment-shift block vanishes exactly beyond the horizon") {
    const double t = r + r / n_theta;
    const SemigroupOperator op = explicit_unperturbed(t, s.a, s.b, n_theta, r);
    const int seg = 3 * (n_theta + 1);
    CHECK(op.op.bottomRightCorner(seg, seg).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("B = 0 copies the node value into the filled slots") {
    NodeMatrixB b0;
    b0.b = Vector::Zero(3);
    b0.conservative = true;
    const AssembledAfrak a0 = assemble_a_frak(s.g, s.c, b0);
    const double t = 0.5;  // r/2
    const SemigroupOperator op = explicit_unperturbed(t, a0, b0, n_theta, r);
    const int shift = n_theta / 2;
    for (int v = 0; v < 3; ++v)
      for (int l = 0; l <= n_theta; ++l) {
        const Index row = d_a + v * (n_theta + 1) + l;
        const double expected = l + shift > n_theta ? 1.0 : 0.0;
        CHECK(op.op(row, a0.node_index(v)) == doctest::Approx(expected));
      }
  }

  SUBCASE("grid alignment is enforced") {
    CHECK_THROWS_AS(explicit_unperturbed(0.5 / n_theta, s.a, s.b, n_theta, r),
                    StepNotMultipleOfDelayGrid);
  }
}

TEST_CASE("explicit blocks converge to the upwind flow on smooth states") {
  // the hard-shift construction and expm of the discrete A0 agree in the
  // limit dtheta -> 0 when applied to smooth data
  const P3Setup s(11, -1.0);
  DelayMeasure mu;
  mu.r = 1.0;
  double err[2];
  int idx = 0;
  for (int n_theta : {16, 64}) {
    const BlockGenerator gen = assemble_full_generator(s.a, mu, n_theta);
    const SemigroupOperator ex =
        explicit_unperturbed(0.5, s.a, s.b, n_theta, mu.r);
    const Matrix em = expm(gen.a0, 0.5);
    Vector x = Vector::Zero(gen.dim());
    for (int v = 0; v < 3; ++v)
      for (int l = 0; l <= n_theta; ++l) {
        const double theta = -mu.r + l * mu.r / n_theta;
        x(gen.seg_index(v, l)) = std::cos(2.0 * theta + v);
      }
    err[idx++] = ((ex.op - em) * x).norm() / x.norm();
  }
  CHECK(err[1] < 0.6 * err[0]);
}

TEST_CASE("dyson-phillips truncations") {
  const P3Setup s(11, -1.0);

  SUBCASE("zeroth term is the unperturbed exponential") {
    DelayMeasure mu;
    mu.r = 1.0;
    mu.atoms = {{-1.0, 0.4}};
    const BlockGenerator gen = assemble_full_generator(s.a, mu, 8);
    const SemigroupOperator dp0 = dyson_phillips(gen, 0.5, 0);
    CHECK((dp0.op - expm(gen.a0, 0.5)).norm() == 0.0);
  }

  SUBCASE("all higher terms vanish for mu = 0") {
    DelayMeasure mu;
    mu.r = 1.0;
    const BlockGenerator gen = assemble_full_generator(s.a, mu, 8);
    const SemigroupOperator dp0 = dyson_phillips(gen, 0.5, 0);
    const SemigroupOperator dp3 = dyson_phillips(gen, 0.5, 3);
    CHECK((dp3.op - dp0.op).norm() == 0.0);
  }

  SUBCASE("residual against expm(A) shrinks with the truncation order") {
    DelayMeasure mu;
    mu.r = 1.0;
    mu.density = DelayMeasure::Density::Uniform;
    mu.density_mass = 1.0;
    const BlockGenerator gen = assemble_full_generator(s.a, mu, 64);
    const Matrix ea = expm(gen.a(), 1.0);
    const double r0 = weighted_operator_norm(
        dyson_phillips(gen, 1.0, 0).op - ea, gen.weights);
    const double r1 = weighted_operator_norm(
        dyson_phillips(gen, 1.0, 1).op - ea, gen.weights);
    const double r4 = weighted_operator_norm(
        dyson_phillips(gen, 1.0, 4).op - ea, gen.weights);
    CHECK(r1 < r0);
    CHECK(r4 < r1);
    CHECK(r4 < 0.2 * r1);
  }
}

TEST_CASE("semigroup identity residual") {
  const P3Setup s(11, -1.0);
  DelayMeasure mu;
  mu.r = 1.0;
  mu.atoms = {{-1.0, 1.0}};
  const BlockGenerator gen = assemble_full_generator(s.a, mu, 20);

  CHECK(check_semigroup_property(gen, 0.1, 0.0) <= 1e-12);
  CHECK(check_semigroup_property(gen, 0.1, 0.1) <= 1e-8);

  // diagonal generator: exponentials commute exactly
  DelayMeasure mu0;
  mu0.r = 1.0;
  const BlockGenerator diag = assemble_full_generator(s.a, mu0, 4);
  CHECK(check_semigroup_property(diag, 0.25, 0.5) <= 1e-10);
}

TEST_CASE("contraction and exponential stability of the spatial semigroup") {
  const P3Setup stable(21, -1.0);
  const double omega = spectral_abscissa(stable.a.a);
  CHECK(omega < 0.0);
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    const double norm =
        weighted_operator_norm(expm(stable.a.a, t), stable.a.weights);
    CHECK(norm <= 1.0 + 1e-10);
    CHECK(norm <= std::exp(omega * t) + 1e-8);
  }

  const P3Setup neutral(21, 0.0);
  for (double t : {0.1, 1.0})
    CHECK(weighted_operator_norm(expm(neutral.a.a, t), neutral.a.weights) <=
          1.0 + 1e-10);
}
