#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netspde/delay.hpp"
#include "netspde/spatial.hpp"
#include "netspde/state.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Small catalog of bounded, uniformly Lipschitz coefficient functions.
/// Edge functions receive (t, x, u(x)); node functions receive
/// (t, d^alpha, Phi(eta)_alpha) — the segment enters only through that
/// summary pair.
struct CoeffFn {
  enum class Kind {
    Zero,
    Constant,       // p1
    ClippedLinear,  // clamp(p1 * v, -p2, p2)
    SinModulated,   // p1 * sin(v)
    SinDelay        // p1 * sin(phi), node-only
  };

  Kind kind = Kind::Zero;
  double p1 = 0.0;
  double p2 = 0.0;

  double bound() const;
  double lipschitz() const;
  double eval(double t, double x, double v, double phi = 0.0) const;
  bool is_zero() const { return kind == Kind::Zero; }
};

struct NoiseSpec {
  CoeffFn g;        // edge diffusion coefficient, same on every edge
  CoeffFn g_tilde;  // node diffusion coefficient
};

/// Empirical check of the declared bound and Lipschitz constant on random
/// probes (fixed probe seed). Throws ValidationError when an evaluation
/// exceeds the bound or a difference quotient exceeds the declared constant
/// by more than 1%.
void validate_coeff_fn(const CoeffFn& fn, bool node_context,
                       const std::string& field);

struct DriftSpec {
  CoeffFn f;  // edge reaction term
};

/// One step of discretized space-time white noise: independent normals with
/// variance dt/h per edge cell and dt per node.
struct WienerIncrement {
  Matrix dw1;  // n_x x m
  Vector dw2;  // n
};

WienerIncrement sample_increment(std::uint64_t master_seed, std::uint64_t path,
                                 std::uint64_t step, int n_x, int m, int n,
                                 double dt, double h);

/// Sum of `k_fine` consecutive fine increments starting at `fine_step`;
/// used by the coupled-refinement error estimate.
WienerIncrement sample_increment_coarse(std::uint64_t master_seed,
                                        std::uint64_t path,
                                        std::uint64_t fine_step, int k_fine,
                                        int n_x, int m, int n, double dt_fine,
                                        double h);

struct StateIncrement {
  Matrix du;  // n_x x m
  Vector dd;  // n
};

/// G(t,X) dW: edge part g(t,x,u) dW1 pointwise, node part
/// g~(t,d,Phi(eta)) dW2, segment part zero.
StateIncrement apply_noise(const NoiseSpec& gspec, double t,
                           const FullState& x, const WienerIncrement& inc,
                           const DelayMeasure& mu);

/// Integration context shared by all paths of a run.
struct SimProblem {
  MetricGraph graph;
  EdgeCoefficient coeff;
  NodeMatrixB node_b;
  AssembledAfrak afrak;
  DelayMeasure mu;
  Vector phi_weights;  // delay quadrature over segment slots
  NoiseSpec noise;
  DriftSpec drift;
  double dt = 0.0;
  double t_final = 0.0;
  std::uint64_t master_seed = 0;
  int snapshot_stride = 1;
  FullState x0;

  enum class Scheme { EulerMaruyama, ExponentialEuler };
  Scheme scheme = Scheme::EulerMaruyama;
  Matrix propagator;  // expm(afrak.a * dt), filled when scheme needs it
};

/// Explicit Euler-Maruyama step. The (u,d) rows advance by
/// X + dt (A X + F) + G dW; the segment advances by the exact slot shift of
/// the new node vector, so eta(0) = d holds exactly after every step.
/// `control` adds g~(t,d,Phi) .* control * dt to the node rows (the
/// noise-channel actuation of the controlled dynamics); pass an empty
/// vector for the uncontrolled system. Throws BlowupDetected when any
/// entry exceeds 1e12.
void em_step_inplace(FullState& x, double t, double dt, const SimProblem& p,
                     const WienerIncrement& inc,
                     const Vector& control = Vector());

/// Exponential (mild) Euler step: the spatial block is propagated by
/// expm(A dt) exactly; drift, delay and noise enter as left-point terms
/// filtered through the same propagator; segment handled as in em_step.
void exp_euler_step_inplace(FullState& x, double t, double dt,
                            const SimProblem& p, const WienerIncrement& inc,
                            const Vector& control = Vector());

/// Value-returning wrappers.
FullState em_step(const FullState& x, double t, double dt, const SimProblem& p,
                  const WienerIncrement& inc);
FullState exp_euler_step(const FullState& x, double t, double dt,
                         const SimProblem& p, const WienerIncrement& inc);

struct Trajectory {
  std::vector<double> times;
  std::vector<FullState> states;
};

/// Fixed-step integration on [0, t_final], snapshots every
/// `snapshot_stride` steps (plus the initial and final states).
/// Deterministic in (master_seed, path_index).
Trajectory simulate_path(const SimProblem& p, std::uint64_t path_index);

/// Prepares derived members (propagator, phi weights) before a run.
void prepare(SimProblem& p);

enum class Functional { TerminalNode, TerminalMass, TerminalNorm2 };

struct FunctionalSpec {
  Functional kind;
  int node = 0;  // for TerminalNode (0-based)
  std::string name;
};

struct FunctionalStats {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_paths = 0;
};

double evaluate_functional(const FunctionalSpec& f, const FullState& x,
                           const SimProblem& p);

/// Runs n_paths independent paths (path keys master_seed x {1..n_paths}),
/// in parallel, and aggregates mean/variance/95% CI per functional in a
/// fixed order regardless of scheduling.
std::vector<FunctionalStats> monte_carlo(
    const SimProblem& p, int n_paths,
    const std::vector<FunctionalSpec>& functionals);

struct StrongOrderResult {
  std::vector<double> dt_values;
  std::vector<double> mean_errors;  // vs the finest-dt reference
  double slope = 0.0;
};

/// Strong error under coupled refinement: all levels share the Brownian
/// paths of the finest level; the regression slope of log(error) against
/// log(dt) estimates the strong order.
StrongOrderResult strong_order_estimate(const SimProblem& p,
                                        const std::vector<double>& dt_list,
                                        int n_paths);

/// Worker count for path-level parallelism; honours NETSPDE_THREADS.
int worker_count();

}  // namespace netspde
