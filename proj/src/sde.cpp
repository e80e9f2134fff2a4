#include "netspde/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "netspde/errors.hpp"
#include "netspde/rng.hpp"
#include "netspde/semigroup.hpp"

namespace netspde {

namespace {
constexpr double kBlowupGuard = 1e12;
}

double CounterRng::box_muller(double u1, double u2) {
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

double CoeffFn::bound() const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return std::abs(p1);
    case Kind::ClippedLinear: return std::abs(p2);
    case Kind::SinModulated: return std::abs(p1);
    case Kind::SinDelay: return std::abs(p1);
  }
  return 0.0;
}

double CoeffFn::lipschitz() const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return 0.0;
    case Kind::ClippedLinear: return std::abs(p1);
    case Kind::SinModulated: return std::abs(p1);
    case Kind::SinDelay: return std::abs(p1);
  }
  return 0.0;
}

double CoeffFn::eval(double, double, double v, double phi) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return p1;
    case Kind::ClippedLinear: return std::clamp(p1 * v, -std::abs(p2), std::abs(p2));
    case Kind::SinModulated: return p1 * std::sin(v);
    case Kind::SinDelay: return p1 * std::sin(phi);
  }
  return 0.0;
}

void validate_coeff_fn(const CoeffFn& fn, bool node_context,
                       const std::string& field) {
  const double bound = fn.bound();
  const double lip = fn.lipschitz();
  const CounterRng rng(0x9e3779b9u, 17, 29);
  std::uint64_t slot = 0;
  for (int probe = 0; probe < 512; ++probe) {
    const double t = std::abs(rng.normal(slot++));
    const double x = 0.5 + 0.25 * rng.normal(slot++);
    const double v1 = 3.0 * rng.normal(slot++);
    const double v2 = v1 + 0.5 * rng.normal(slot++);
    const double phi1 = 3.0 * rng.normal(slot++);
    const double phi2 = node_context ? phi1 : 0.0;
    const double f1 = fn.eval(t, x, v1, phi1);
    const double f2 = fn.eval(t, x, v2, phi2);
    if (std::abs(f1) > bound + 1e-12 || std::abs(f2) > bound + 1e-12)
      throw ValidationError(field + ": evaluation exceeds the declared bound");
    if (std::abs(v1 - v2) > 1e-8 &&
        std::abs(f1 - f2) > 1.01 * lip * std::abs(v1 - v2) + 1e-12)
      throw ValidationError(field +
                            ": difference quotient exceeds the declared "
                            "Lipschitz constant");
  }
}

WienerIncrement sample_increment(std::uint64_t master_seed, std::uint64_t path,
                                 std::uint64_t step, int n_x, int m, int n,
                                 double dt, double h) {
  if (!(dt > 0.0) || !(h > 0.0))
    throw ValidationError("sample_increment needs dt > 0 and h > 0");
  const CounterRng rng(master_seed, path, step);
  WienerIncrement inc;
  inc.dw1.resize(n_x, m);
  inc.dw2.resize(n);
  const double s1 = std::sqrt(dt / h);
  const double s2 = std::sqrt(dt);
  std::uint64_t slot = 0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < n_x; ++k) inc.dw1(k, j) = s1 * rng.normal(slot++);
  for (int v = 0; v < n; ++v) inc.dw2(v) = s2 * rng.normal(slot++);
  return inc;
}

WienerIncrement sample_increment_coarse(std::uint64_t master_seed,
                                        std::uint64_t path,
                                        std::uint64_t fine_step, int k_fine,
                                        int n_x, int m, int n, double dt_fine,
                                        double h) {
  WienerIncrement acc =
      sample_increment(master_seed, path, fine_step, n_x, m, n, dt_fine, h);
  for (int i = 1; i < k_fine; ++i) {
    const WienerIncrement inc = sample_increment(master_seed, path,
                                                 fine_step + i, n_x, m, n,
                                                 dt_fine, h);
    acc.dw1 += inc.dw1;
    acc.dw2 += inc.dw2;
  }
  return acc;
}

StateIncrement apply_noise(const NoiseSpec& gspec, double t,
                           const FullState& x, const WienerIncrement& inc,
                           const DelayMeasure& mu) {
  if (inc.dw1.rows() != x.u.rows() || inc.dw1.cols() != x.u.cols() ||
      inc.dw2.size() != x.d.size())
    throw ShapeMismatch("wiener increment shape does not match the state");
  StateIncrement out;
  out.du.resize(x.u.rows(), x.u.cols());
  out.dd.resize(x.d.size());
  const double h = 1.0 / static_cast<double>(x.n_x() - 1);
  if (gspec.g.is_zero()) {
    out.du.setZero();
  } else {
    for (int j = 0; j < x.n_edges(); ++j)
      for (int k = 0; k < x.n_x(); ++k)
        out.du(k, j) =
            gspec.g.eval(t, k * h, x.u(k, j)) * inc.dw1(k, j);
  }
  if (gspec.g_tilde.is_zero()) {
    out.dd.setZero();
  } else {
    const Vector phi = delay_integral(mu, x.eta);
    for (int v = 0; v < x.n_nodes(); ++v)
      out.dd(v) = gspec.g_tilde.eval(t, 0.0, x.d(v), phi(v)) * inc.dw2(v);
  }
  return out;
}

namespace {

void guard_blowup(const Vector& y) {
  if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kBlowupGuard)
    throw BlowupDetected("state magnitude exceeded 1e12");
}

/// Shared drift of both schemes on the packed (interior, node) vector:
/// delay term, reaction term and control actuation (node rows).
Vector assemble_forcing(const FullState& x, double t, const SimProblem& p,
                        const Vector& control) {
  const AssembledAfrak& a = p.afrak;
  Vector forcing = Vector::Zero(a.dim());
  if (p.phi_weights.size() > 0) {
    const Vector phi = x.eta.values.transpose() * p.phi_weights;
    forcing.tail(a.n) += phi;
  }
  if (!p.drift.f.is_zero()) {
    const double h = a.h;
    for (int j = 0; j < a.m; ++j)
      for (int k = 1; k <= a.n_x - 2; ++k)
        forcing(a.interior_index(j, k)) +=
            p.drift.f.eval(t, k * h, x.u(k, j));
  }
  if (control.size() > 0) {
    if (control.size() != a.n)
      throw ShapeMismatch("control vector has wrong dimension");
    const Vector phi = delay_integral(p.mu, x.eta);
    for (int v = 0; v < a.n; ++v)
      forcing(a.node_index(v)) +=
          p.noise.g_tilde.eval(t, 0.0, x.d(v), phi(v)) * control(v);
  }
  return forcing;
}

Vector noise_packed(const FullState& x, double t, const SimProblem& p,
                    const WienerIncrement& inc) {
  const AssembledAfrak& a = p.afrak;
  Vector packed = Vector::Zero(a.dim());
  if (p.noise.g.is_zero() && p.noise.g_tilde.is_zero()) return packed;
  const StateIncrement noise = apply_noise(p.noise, t, x, inc, p.mu);
  for (int j = 0; j < a.m; ++j)
    for (int k = 1; k <= a.n_x - 2; ++k)
      packed(a.interior_index(j, k)) = noise.du(k, j);
  packed.tail(a.n) = noise.dd;
  return packed;
}

}  // namespace

void em_step_inplace(FullState& x, double t, double dt, const SimProblem& p,
                     const WienerIncrement& inc, const Vector& control) {
  const AssembledAfrak& a = p.afrak;
  Vector y = pack_spatial(x, a);
  Vector ynew = y + dt * (a.a * y + assemble_forcing(x, t, p, control)) +
                noise_packed(x, t, p, inc);
  guard_blowup(ynew);
  unpack_spatial(ynew, a, p.graph, x);
  push_segment(x.eta, x.d, dt);
}

void exp_euler_step_inplace(FullState& x, double t, double dt,
                            const SimProblem& p, const WienerIncrement& inc,
                            const Vector& control) {
  const AssembledAfrak& a = p.afrak;
  if (p.propagator.rows() != a.dim())
    throw ComputeError("exponential propagator not prepared for this run");
  const Vector y = pack_spatial(x, a);
  Vector ynew = p.propagator *
                (y + dt * assemble_forcing(x, t, p, control) +
                 noise_packed(x, t, p, inc));
  guard_blowup(ynew);
  unpack_spatial(ynew, a, p.graph, x);
  push_segment(x.eta, x.d, dt);
}

FullState em_step(const FullState& x, double t, double dt, const SimProblem& p,
                  const WienerIncrement& inc) {
  FullState out = x;
  em_step_inplace(out, t, dt, p, inc);
  return out;
}

FullState exp_euler_step(const FullState& x, double t, double dt,
                         const SimProblem& p, const WienerIncrement& inc) {
  FullState out = x;
  exp_euler_step_inplace(out, t, dt, p, inc);
  return out;
}

void prepare(SimProblem& p) {
  p.phi_weights = delay_quadrature_weights(p.mu, p.x0.eta.n_theta());
  if (p.mu.atoms.empty() && p.mu.density == DelayMeasure::Density::None)
    p.phi_weights.setZero();
  if (p.scheme == SimProblem::Scheme::ExponentialEuler && p.dt > 0.0)
    p.propagator = expm(p.afrak.a, p.dt);
  check_state(p.x0, p.graph);
}

Trajectory simulate_path(const SimProblem& p, std::uint64_t path_index) {
  const int n_steps =
      p.t_final <= 0.0
          ? 0
          : static_cast<int>(std::llround(p.t_final / p.dt));
  if (n_steps > 0 &&
      std::abs(n_steps * p.dt - p.t_final) > 1e-9 * std::max(1.0, p.t_final))
    throw ValidationError("sde.t_final must be an integer multiple of sde.dt");

  Trajectory traj;
  FullState x = p.x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * p.dt;
    const WienerIncrement inc =
        sample_increment(p.master_seed, path_index, static_cast<std::uint64_t>(k),
                         p.afrak.n_x, p.afrak.m, p.afrak.n, p.dt, p.afrak.h);
    if (p.scheme == SimProblem::Scheme::ExponentialEuler)
      exp_euler_step_inplace(x, t, p.dt, p, inc);
    else
      em_step_inplace(x, t, p.dt, p, inc);
    if ((k + 1) % p.snapshot_stride == 0 || k + 1 == n_steps) {
      traj.times.push_back((k + 1) * p.dt);
      traj.states.push_back(x);
    }
  }
  return traj;
}

double evaluate_functional(const FunctionalSpec& f, const FullState& x,
                           const SimProblem& p) {
  switch (f.kind) {
    case Functional::TerminalNode:
      return x.d(f.node);
    case Functional::TerminalMass: {
      const Vector y = pack_spatial(x, p.afrak);
      return p.afrak.weights.dot(y);
    }
    case Functional::TerminalNorm2: {
      const Vector y = pack_spatial(x, p.afrak);
      double acc = y.cwiseAbs2().dot(p.afrak.weights);
      const double dtheta = x.eta.dtheta();
      for (int v = 0; v < x.n_nodes(); ++v)
        for (int l = 0; l < x.eta.n_slots(); ++l)
          acc += dtheta * ((l == 0 || l == x.eta.n_theta()) ? 0.5 : 1.0) *
                 x.eta.values(l, v) * x.eta.values(l, v);
      return std::sqrt(acc);
    }
  }
  return 0.0;
}

int worker_count() {
  if (const char* env = std::getenv("NETSPDE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

/// Static path partition; results land in caller-indexed slots so the
/// reduction order never depends on scheduling.
template <typename Fn>
void parallel_paths(int n_paths, Fn&& fn) {
  const int workers = std::min(worker_count(), std::max(1, n_paths));
  if (workers <= 1) {
    for (int i = 0; i < n_paths; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::atomic<int> counter{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = counter.fetch_add(1);
        if (i >= n_paths) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<FunctionalStats> monte_carlo(
    const SimProblem& p, int n_paths,
    const std::vector<FunctionalSpec>& functionals) {
  if (n_paths < 2) throw ValidationError("sde.n_paths must be >= 2");
  // per-path values, fixed layout
  Matrix values(n_paths, static_cast<Index>(functionals.size()));
  parallel_paths(n_paths, [&](int i) {
    SimProblem local = p;
    local.snapshot_stride = std::max(
        1, static_cast<int>(std::llround(p.t_final / std::max(p.dt, 1e-300))));
    const Trajectory traj = simulate_path(local, static_cast<std::uint64_t>(i) + 1);
    const FullState& terminal = traj.states.back();
    for (std::size_t f = 0; f < functionals.size(); ++f)
      values(i, static_cast<Index>(f)) =
          evaluate_functional(functionals[f], terminal, p);
  });

  std::vector<FunctionalStats> stats;
  stats.reserve(functionals.size());
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    FunctionalStats s;
    s.name = functionals[f].name;
    s.n_paths = n_paths;
    const auto col = values.col(static_cast<Index>(f));
    s.mean = col.mean();
    s.variance = (col.array() - s.mean).square().sum() /
                 static_cast<double>(n_paths - 1);
    const double half = 1.959963984540054 *
                        std::sqrt(s.variance / static_cast<double>(n_paths));
    s.ci_lo = s.mean - half;
    s.ci_hi = s.mean + half;
    stats.push_back(std::move(s));
  }
  return stats;
}

StrongOrderResult strong_order_estimate(const SimProblem& p,
                                        const std::vector<double>& dt_list,
                                        int n_paths) {
  if (dt_list.size() < 2)
    throw ValidationError("strong order estimate needs at least two dt values");
  for (std::size_t i = 1; i < dt_list.size(); ++i)
    if (dt_list[i] >= dt_list[i - 1])
      throw ValidationError("dt list must be strictly decreasing");
  const double dt_fine = dt_list.back();
  const int n_fine = static_cast<int>(std::llround(p.t_final / dt_fine));
  std::vector<int> ratios;
  for (double dt : dt_list) {
    const double r = dt / dt_fine;
    const int k = static_cast<int>(std::llround(r));
    if (std::abs(r - k) > 1e-9)
      throw ValidationError("each dt must be an integer multiple of the finest dt");
    ratios.push_back(k);
  }

  const std::size_t n_levels = dt_list.size() - 1;  // finest is the reference
  Matrix errors(n_paths, static_cast<Index>(n_levels));

  parallel_paths(n_paths, [&](int path) {
    const std::uint64_t key = static_cast<std::uint64_t>(path) + 1;
    // reference at the finest dt
    SimProblem fine = p;
    fine.dt = dt_fine;
    if (fine.scheme == SimProblem::Scheme::ExponentialEuler)
      fine.propagator = expm(fine.afrak.a, dt_fine);
    FullState ref = p.x0;
    for (int k = 0; k < n_fine; ++k) {
      const WienerIncrement inc =
          sample_increment(p.master_seed, key, static_cast<std::uint64_t>(k),
                           p.afrak.n_x, p.afrak.m, p.afrak.n, dt_fine,
                           p.afrak.h);
      if (fine.scheme == SimProblem::Scheme::ExponentialEuler)
        exp_euler_step_inplace(ref, k * dt_fine, dt_fine, fine, inc);
      else
        em_step_inplace(ref, k * dt_fine, dt_fine, fine, inc);
    }
    const Vector yref = pack_spatial(ref, p.afrak);

    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
      const double dt = dt_list[lvl];
      const int k_fine = ratios[lvl];
      const int n_steps = n_fine / k_fine;
      SimProblem coarse = p;
      coarse.dt = dt;
      if (coarse.scheme == SimProblem::Scheme::ExponentialEuler)
        coarse.propagator = expm(coarse.afrak.a, dt);
      FullState x = p.x0;
      for (int k = 0; k < n_steps; ++k) {
        const WienerIncrement inc = sample_increment_coarse(
            p.master_seed, key, static_cast<std::uint64_t>(k) * k_fine, k_fine,
            p.afrak.n_x, p.afrak.m, p.afrak.n, dt_fine, p.afrak.h);
        if (coarse.scheme == SimProblem::Scheme::ExponentialEuler)
          exp_euler_step_inplace(x, k * dt, dt, coarse, inc);
        else
          em_step_inplace(x, k * dt, dt, coarse, inc);
      }
      const Vector y = pack_spatial(x, p.afrak);
      errors(path, static_cast<Index>(lvl)) =
          std::sqrt(((y - yref).cwiseAbs2().dot(p.afrak.weights)));
    }
  });

  StrongOrderResult result;
  for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
    result.dt_values.push_back(dt_list[lvl]);
    result.mean_errors.push_back(errors.col(static_cast<Index>(lvl)).mean());
  }
  // least-squares slope of log(err) against log(dt)
  const Index k = static_cast<Index>(n_levels);
  Vector lx(k), ly(k);
  for (Index i = 0; i < k; ++i) {
    lx(i) = std::log(result.dt_values[static_cast<std::size_t>(i)]);
    ly(i) = std::log(std::max(result.mean_errors[static_cast<std::size_t>(i)],
                              1e-300));
  }
  const double mx = lx.mean(), my = ly.mean();
  result.slope = (lx.array() - mx).matrix().dot((ly.array() - my).matrix()) /
                 (lx.array() - mx).square().sum();
  return result;
}

}  // namespace netspde
