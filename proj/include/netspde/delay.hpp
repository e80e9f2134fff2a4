#pragma once

#include <utility>
#include <vector>

#include "netspde/spatial.hpp"
#include "netspde/state.hpp"
#include "netspde/types.hpp"

namespace netspde {

/// Bounded-variation measure mu on [-r, 0]: point atoms plus an optional
/// density from a small catalog. The discrete delay mu = delta_{-r} is the
/// single atom (-r, 1).
struct DelayMeasure {
  enum class Density { None, Uniform };

  double r = 1.0;
  std::vector<std::pair<double, double>> atoms;  // (theta, weight)
  Density density = Density::None;
  double density_mass = 0.0;  // total mass of the uniform density

  double total_variation() const;
};

void validate_delay_measure(const DelayMeasure& mu);

/// Quadrature weights over the segment slots such that
/// integral eta dmu  ~=  sum_l w(l) * eta(theta_l).
/// On-grid atoms read their slot exactly; off-grid atoms split linearly
/// between the two neighbouring slots; the density uses trapezoid weights.
Vector delay_quadrature_weights(const DelayMeasure& mu, int n_theta);

/// Phi(eta): the delay functional applied per node column.
Vector delay_integral(const DelayMeasure& mu, const SegmentBuffer& seg);

/// Advances the history by dt = k * dtheta slots: shifts rows toward
/// theta = -r and fills the vacated slots by linear interpolation between
/// the previous theta=0 value and `new_value` (which lands exactly at
/// theta = 0).
void push_segment(SegmentBuffer& seg, const Vector& new_value, double dt);

/// Rounds t to an integer number of delay-grid slots; throws
/// StepNotMultipleOfDelayGrid when t is not grid-aligned.
int slots_for_step(double t, double dtheta);

/// Full generator on (interior, nodes, segments). a0 holds the decoupled
/// part: the spatial block, the upwind transport of the segment, and a
/// theta=0 row slaved to the node dynamics (copy of the node row, so that
/// eta(0) tracks d exactly under the unperturbed flow). a1 carries the
/// delay quadrature weights in the node rows only.
struct BlockGenerator {
  Matrix a0;
  Matrix a1;
  AssembledAfrak spatial;
  DelayMeasure mu;
  int n_theta = 0;
  Vector weights;  // diagonal inner product on the full space

  int n_slots() const { return n_theta + 1; }
  int dim() const { return spatial.dim() + spatial.n * n_slots(); }
  double dtheta() const { return mu.r / static_cast<double>(n_theta); }
  Index seg_index(int vertex, int slot) const {
    return static_cast<Index>(spatial.dim()) + vertex * n_slots() + slot;
  }
  Matrix a() const { return a0 + a1; }
};

BlockGenerator assemble_full_generator(const AssembledAfrak& a,
                                       const DelayMeasure& mu, int n_theta);

/// q = sqrt(t0) * K * |mu| with K = sup_{s in [0,r]} |e^{sB}|. For diagonal
/// B with b <= 0 the sup sits at s = 0, so K = 1. The perturbation
/// certificate requires q < 1; the caller checks.
double miyadera_voigt_bound(const DelayMeasure& mu, const NodeMatrixB& b,
                            double t0);

}  // namespace netspde
