#pragma once

#include <string>
#include <utility>
#include <vector>

#include "netspde/delay.hpp"
#include "netspde/sde.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Quadratic control problem on the full state: running cost
/// q_x |X|^2_W + q_z |z|^2, terminal cost q_t |X(T)|^2_W, box domain
/// [-z_max, z_max]^n. The control enters the node rows through the noise
/// coefficient (noise-channel actuation).
struct ControlProblem {
  double q_x = 0.0;
  double q_z = 1.0;
  double q_t = 0.0;
  double z_max = 1.0;
};

void validate_control_problem(const ControlProblem& prob);

/// Packs the full state (interior, nodes, segment slots) into a vector of
/// dimension gen.dim().
Vector pack_full(const FullState& x, const BlockGenerator& gen);

/// Squared weighted norm of the full state.
double state_norm2(const FullState& x, const BlockGenerator& gen);

/// Running cost of the quadratic catalog.
double running_cost(const ControlProblem& prob, const FullState& x,
                    const Vector& z, const BlockGenerator& gen);

/// Pointwise Hamiltonian minimization over the box: returns (psi, z*) with
/// psi = -inf_z { l(t,X,z) + <Y, G(t,X) R z> } and the componentwise
/// minimizer z*_a = clip(-(R^T Y)_a / (2 q_z), -z_max, z_max), where
/// (R^T Y)_a = g~(t, d_a, Phi(eta)_a) * Y_(node a).
std::pair<double, Vector> hamiltonian(const ControlProblem& prob, double t,
                                      const FullState& x, const Vector& y,
                                      const SimProblem& sim,
                                      const BlockGenerator& gen);

/// Continuous algebraic Riccati equation A'P + PA - P B B' P / qz + qx I = 0
/// by the matrix sign iteration on the Hamiltonian block matrix. Requires a
/// stabilizable/detectable pair; throws ComputeError otherwise.
Matrix care_solve(const Matrix& a, const Matrix& b, double qx, double qz);

/// Linear costate proxy Y(X) = P X for the feedback policy, derived from the
/// deterministic LQ problem on the full generator in the weighted geometry,
/// with the noise coefficient frozen at (t=0, x0).
Matrix riccati_costate_map(const ControlProblem& prob, const SimProblem& sim,
                           const BlockGenerator& gen);

struct Policy {
  enum class Kind { Constant, Feedback };
  Kind kind = Kind::Constant;
  std::string name;
  Vector zbar;     // Constant
  Matrix costate;  // Feedback: Y = costate * pack_full(X)
};

struct ClosedLoopResult {
  Trajectory trajectory;
  std::vector<Vector> controls;
  double cost = 0.0;  // realized running + terminal cost
};

/// Integrates one controlled path: at every step evaluates the policy
/// (feedback policies go through the Hamiltonian argmin), injects the
/// controlled drift into the node rows and advances with the configured
/// scheme. Running cost by trapezoid along the path.
ClosedLoopResult simulate_closed_loop(const ControlProblem& prob,
                                      const Policy& policy,
                                      const SimProblem& sim,
                                      const BlockGenerator& gen,
                                      std::uint64_t path_index);

struct CostEstimate {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_paths = 0;
};

/// Monte Carlo estimate of the cost functional under a policy; path keys
/// (master_seed, 1..n_paths) so that different policies share the noise.
CostEstimate cost_estimate(const ControlProblem& prob, const Policy& policy,
                           const SimProblem& sim, const BlockGenerator& gen,
                           int n_paths);

struct TournamentEntry {
  std::string policy;
  double j_mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int rank = 0;
  bool ci_overlaps_next = false;
};

/// Evaluates every policy under common random numbers and ranks by mean
/// cost (ascending). Deterministic under a fixed master seed.
std::vector<TournamentEntry> policy_tournament(
    const ControlProblem& prob, const std::vector<Policy>& policies,
    const SimProblem& sim, const BlockGenerator& gen, int n_paths);

}  // namespace netspde
