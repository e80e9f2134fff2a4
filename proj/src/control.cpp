#include "netspde/control.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "netspde/errors.hpp"
#include "netspde/semigroup.hpp"

namespace netspde {

void validate_control_problem(const ControlProblem& prob) {
  if (!(prob.q_z > 0.0))
    throw ValidationError("control.l q_z must be > 0");
  if (prob.q_x < 0.0 || prob.q_t < 0.0)
    throw ValidationError("control cost weights must be >= 0");
  if (!(prob.z_max > 0.0))
    throw EmptyControlDomain("control.z_max must be > 0");
}

Vector pack_full(const FullState& x, const BlockGenerator& gen) {
  Vector v(gen.dim());
  v.head(gen.spatial.dim()) = pack_spatial(x, gen.spatial);
  for (int node = 0; node < gen.spatial.n; ++node)
    for (int l = 0; l <= gen.n_theta; ++l)
      v(gen.seg_index(node, l)) = x.eta.values(l, node);
  return v;
}

double state_norm2(const FullState& x, const BlockGenerator& gen) {
  const Vector v = pack_full(x, gen);
  return v.cwiseAbs2().dot(gen.weights);
}

double running_cost(const ControlProblem& prob, const FullState& x,
                    const Vector& z, const BlockGenerator& gen) {
  return prob.q_x * state_norm2(x, gen) + prob.q_z * z.squaredNorm();
}

std::pair<double, Vector> hamiltonian(const ControlProblem& prob, double t,
                                      const FullState& x, const Vector& y,
                                      const SimProblem& sim,
                                      const BlockGenerator& gen) {
  validate_control_problem(prob);
  if (y.size() != gen.dim())
    throw ShapeMismatch("costate vector does not match the generator");
  const int n = gen.spatial.n;
  const Vector phi = delay_integral(sim.mu, x.eta);
  Vector z_star(n);
  double pairing = 0.0;
  for (int v = 0; v < n; ++v) {
    const double actuation =
        sim.noise.g_tilde.eval(t, 0.0, x.d(v), phi(v)) *
        y(gen.spatial.node_index(v));
    z_star(v) = std::clamp(-actuation / (2.0 * prob.q_z), -prob.z_max,
                           prob.z_max);
    pairing += actuation * z_star(v);
  }
  const double psi = -(running_cost(prob, x, z_star, gen) + pairing);
  return {psi, z_star};
}

Matrix care_solve(const Matrix& a, const Matrix& b, double qx, double qz) {
  const Index n = a.rows();
  if (a.cols() != n || b.rows() != n)
    throw ShapeMismatch("care_solve dimension mismatch");
  Matrix h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a;
  h.topRightCorner(n, n) = -(b * b.transpose()) / qz;
  h.bottomLeftCorner(n, n) = -qx * Matrix::Identity(n, n);
  h.bottomRightCorner(n, n) = -a.transpose();

  // Matrix sign iteration, norm-balanced scaling away from the fixed point.
  // Transport modes sit close to the imaginary axis, which caps the
  // attainable accuracy; a stagnation stop plus the residual check below
  // is what certifies the solution.
  Matrix z = h;
  double rel = 1.0, best = 1e300;
  int stalled = 0;
  for (int iter = 0;; ++iter) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const Matrix z_inv = lu.inverse();
    if (!z_inv.allFinite())
      throw ComputeError("riccati sign iteration became singular");
    double c = 1.0;
    if (rel > 1e-2) {
      c = std::sqrt(z_inv.norm() / z.norm());
      if (!std::isfinite(c) || c <= 0.0) c = 1.0;
    }
    const Matrix z_next = 0.5 * (c * z + z_inv / c);
    rel = (z_next - z).cwiseAbs().sum() / z.cwiseAbs().sum();
    z = z_next;
    if (rel <= 1e-13) break;
    if (rel < 0.5 * best) {
      best = rel;
      stalled = 0;
    } else if (++stalled >= 6 && rel < 1e-6) {
      break;
    }
    if (iter >= 200)
      throw ComputeError("riccati sign iteration did not converge");
  }

  // sign(H) = Z; the stabilizing solution satisfies
  // [Z12; Z22 + I] P = -[Z11 + I; Z21]
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs.topRows(n) = z.topRightCorner(n, n);
  lhs.bottomRows(n) = z.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs.topRows(n) = -(z.topLeftCorner(n, n) + Matrix::Identity(n, n));
  rhs.bottomRows(n) = -z.bottomLeftCorner(n, n);
  Matrix p = lhs.colPivHouseholderQr().solve(rhs);
  p = 0.5 * (p + p.transpose()).eval();
  if (!p.allFinite()) throw ComputeError("riccati solution is not finite");
  const Matrix residual = a.transpose() * p + p * a -
                          p * b * b.transpose() * p / qz +
                          qx * Matrix::Identity(n, n);
  if (residual.norm() > 1e-5 * (1.0 + p.norm()))
    throw ComputeError("riccati solution failed the residual check");
  return p;
}

Matrix riccati_costate_map(const ControlProblem& prob, const SimProblem& sim,
                           const BlockGenerator& gen) {
  validate_control_problem(prob);
  const int dim = gen.dim();
  const int n = gen.spatial.n;
  const Vector phi0 = delay_integral(sim.mu, sim.x0.eta);
  Matrix b0 = Matrix::Zero(dim, n);
  for (int v = 0; v < n; ++v)
    b0(gen.spatial.node_index(v), v) =
        sim.noise.g_tilde.eval(0.0, 0.0, sim.x0.d(v), phi0(v));
  if (b0.cwiseAbs().maxCoeff() == 0.0)
    throw ComputeError(
        "feedback actuation is identically zero (noise.g_tilde vanishes at "
        "the initial state)");

  const Vector sqrt_w = gen.weights.cwiseSqrt();
  const Matrix a_t =
      sqrt_w.asDiagonal() * gen.a() * sqrt_w.cwiseInverse().asDiagonal();
  const Matrix b_t = sqrt_w.asDiagonal() * b0;
  const Matrix p_t = care_solve(a_t, b_t, prob.q_x, prob.q_z);
  return 2.0 *
         (sqrt_w.cwiseInverse().asDiagonal() * p_t * sqrt_w.asDiagonal());
}

namespace {

Vector policy_control(const ControlProblem& prob, const Policy& policy,
                      double t, const FullState& x, const SimProblem& sim,
                      const BlockGenerator& gen) {
  if (policy.kind == Policy::Kind::Constant) {
    Vector z = policy.zbar;
    for (Index i = 0; i < z.size(); ++i)
      z(i) = std::clamp(z(i), -prob.z_max, prob.z_max);
    return z;
  }
  const Vector y = policy.costate * pack_full(x, gen);
  return hamiltonian(prob, t, x, y, sim, gen).second;
}

}  // namespace

ClosedLoopResult simulate_closed_loop(const ControlProblem& prob,
                                      const Policy& policy,
                                      const SimProblem& sim,
                                      const BlockGenerator& gen,
                                      std::uint64_t path_index) {
  validate_control_problem(prob);
  const int n_steps =
      sim.t_final <= 0.0
          ? 0
          : static_cast<int>(std::llround(sim.t_final / sim.dt));
  ClosedLoopResult out;
  FullState x = sim.x0;
  out.trajectory.times.push_back(0.0);
  out.trajectory.states.push_back(x);

  double cost_acc = 0.0;
  double prev_l =
      running_cost(prob, x, policy_control(prob, policy, 0.0, x, sim, gen), gen);
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * sim.dt;
    const Vector z = policy_control(prob, policy, t, x, sim, gen);
    out.controls.push_back(z);
    const WienerIncrement inc = sample_increment(
        sim.master_seed, path_index, static_cast<std::uint64_t>(k),
        sim.afrak.n_x, sim.afrak.m, sim.afrak.n, sim.dt, sim.afrak.h);
    if (sim.scheme == SimProblem::Scheme::ExponentialEuler)
      exp_euler_step_inplace(x, t, sim.dt, sim, inc, z);
    else
      em_step_inplace(x, t, sim.dt, sim, inc, z);
    const Vector z_next =
        policy_control(prob, policy, (k + 1) * sim.dt, x, sim, gen);
    const double cur_l = running_cost(prob, x, z_next, gen);
    cost_acc += 0.5 * sim.dt * (prev_l + cur_l);
    prev_l = cur_l;
    if ((k + 1) % sim.snapshot_stride == 0 || k + 1 == n_steps) {
      out.trajectory.times.push_back((k + 1) * sim.dt);
      out.trajectory.states.push_back(x);
    }
  }
  out.cost = cost_acc + prob.q_t * state_norm2(x, gen);
  return out;
}

CostEstimate cost_estimate(const ControlProblem& prob, const Policy& policy,
                           const SimProblem& sim, const BlockGenerator& gen,
                           int n_paths) {
  if (n_paths < 2) throw ValidationError("cost estimate needs n_paths >= 2");
  Vector costs(n_paths);
  {
    const int workers = std::min(worker_count(), n_paths);
    std::atomic<int> counter{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        while (true) {
          const int i = counter.fetch_add(1);
          if (i >= n_paths) break;
          try {
            SimProblem local = sim;
            local.snapshot_stride = 1 << 30;  // keep terminal state only
            costs(i) = simulate_closed_loop(prob, policy, local, gen,
                                            static_cast<std::uint64_t>(i) + 1)
                           .cost;
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  CostEstimate est;
  est.n_paths = n_paths;
  est.mean = costs.mean();
  const double var = (costs.array() - est.mean).square().sum() /
                     static_cast<double>(n_paths - 1);
  const double half =
      1.959963984540054 * std::sqrt(var / static_cast<double>(n_paths));
  est.ci_lo = est.mean - half;
  est.ci_hi = est.mean + half;
  return est;
}

std::vector<TournamentEntry> policy_tournament(
    const ControlProblem& prob, const std::vector<Policy>& policies,
    const SimProblem& sim, const BlockGenerator& gen, int n_paths) {
  if (policies.size() < 2)
    throw ValidationError("tournament needs at least two policies");
  std::vector<TournamentEntry> entries;
  for (const Policy& policy : policies) {
    const CostEstimate est = cost_estimate(prob, policy, sim, gen, n_paths);
    TournamentEntry e;
    e.policy = policy.name;
    e.j_mean = est.mean;
    e.ci_lo = est.ci_lo;
    e.ci_hi = est.ci_hi;
    entries.push_back(e);
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return entries[a].j_mean < entries[b].j_mean;
                   });
  std::vector<TournamentEntry> ranked;
  for (std::size_t r = 0; r < order.size(); ++r) {
    TournamentEntry e = entries[order[r]];
    e.rank = static_cast<int>(r) + 1;
    if (r + 1 < order.size())
      e.ci_overlaps_next = entries[order[r + 1]].ci_lo <= e.ci_hi;
    ranked.push_back(e);
  }
  return ranked;
}

}  // namespace netspde
