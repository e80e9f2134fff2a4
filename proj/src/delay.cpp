#include "netspde/delay.hpp"

#include <cmath>
#include <string>

#include "netspde/errors.hpp"

namespace netspde {

double DelayMeasure::total_variation() const {
  double tv = 0.0;
  for (const auto& [theta, w] : atoms) tv += std::abs(w);
  if (density == Density::Uniform) tv += std::abs(density_mass);
  return tv;
}

void validate_delay_measure(const DelayMeasure& mu) {
  if (!(mu.r > 0.0) || !std::isfinite(mu.r))
    throw ValidationError("delay.r must be a positive real");
  for (const auto& [theta, w] : mu.atoms) {
    if (theta < -mu.r - 1e-12 || theta > 1e-12)
      throw ValidationError("delay atom at theta=" + std::to_string(theta) +
                            " outside [-r, 0]");
    if (!std::isfinite(w))
      throw ValidationError("delay atom weight is not finite");
  }
  if (!std::isfinite(mu.total_variation()))
    throw ValidationError("delay measure has non-finite total variation");
}

Vector delay_quadrature_weights(const DelayMeasure& mu, int n_theta) {
  if (n_theta < 1) throw ValidationError("delay.n_theta must be >= 1");
  const double dtheta = mu.r / static_cast<double>(n_theta);
  Vector w = Vector::Zero(n_theta + 1);
  for (const auto& [theta, weight] : mu.atoms) {
    const double s = (theta + mu.r) / dtheta;  // slot coordinate
    const double nearest = std::round(s);
    if (std::abs(s - nearest) < 1e-9) {
      w(static_cast<Index>(nearest)) += weight;  // exact slot read
    } else {
      const int lo = static_cast<int>(std::floor(s));
      const double frac = s - lo;
      w(lo) += weight * (1.0 - frac);
      w(lo + 1) += weight * frac;
    }
  }
  if (mu.density == DelayMeasure::Density::Uniform) {
    const double rho = mu.density_mass / mu.r;
    for (int l = 0; l <= n_theta; ++l)
      w(l) += rho * dtheta * ((l == 0 || l == n_theta) ? 0.5 : 1.0);
  }
  return w;
}

Vector delay_integral(const DelayMeasure& mu, const SegmentBuffer& seg) {
  if (std::abs(seg.r - mu.r) > 1e-12 * std::max(1.0, mu.r))
    throw HorizonMismatch("segment horizon " + std::to_string(seg.r) +
                          " does not match measure horizon " +
                          std::to_string(mu.r));
  const Vector w = delay_quadrature_weights(mu, seg.n_theta());
  return seg.values.transpose() * w;
}

int slots_for_step(double t, double dtheta) {
  const double s = t / dtheta;
  const double nearest = std::round(s);
  if (std::abs(s - nearest) > 1e-9 * std::max(1.0, std::abs(s)))
    throw StepNotMultipleOfDelayGrid(
        "time step " + std::to_string(t) +
        " is not an integer multiple of the delay grid spacing " +
        std::to_string(dtheta));
  return static_cast<int>(nearest);
}

void push_segment(SegmentBuffer& seg, const Vector& new_value, double dt) {
  if (new_value.size() != seg.values.cols())
    throw ShapeMismatch("pushed value has wrong dimension");
  const int k = slots_for_step(dt, seg.dtheta());
  if (k < 0) throw StepNotMultipleOfDelayGrid("negative push");
  if (k == 0) return;
  const int slots = seg.n_slots();
  const Vector previous = seg.values.row(slots - 1);  // old theta=0 value
  const int kept = slots - k;
  if (kept > 0) {
    // shift toward theta = -r
    seg.values.topRows(kept) = seg.values.bottomRows(kept).eval();
    for (int i = 1; i <= k; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(k);
      seg.values.row(kept - 1 + i) =
          ((1.0 - frac) * previous + frac * new_value).transpose();
    }
  } else {
    // the whole buffer is overwritten; interpolate across the push
    for (int l = 0; l < slots; ++l) {
      const double frac =
          static_cast<double>(l + k - (slots - 1)) / static_cast<double>(k);
      seg.values.row(l) = ((1.0 - frac) * previous + frac * new_value).transpose();
    }
  }
  seg.values.row(slots - 1) = new_value.transpose();
}

BlockGenerator assemble_full_generator(const AssembledAfrak& a,
                                       const DelayMeasure& mu, int n_theta) {
  validate_delay_measure(mu);
  if (n_theta < 1) throw ValidationError("delay.n_theta must be >= 1");

  BlockGenerator gen;
  gen.spatial = a;
  gen.mu = mu;
  gen.n_theta = n_theta;

  const int d_a = a.dim();
  const int dim = d_a + a.n * (n_theta + 1);
  const double dtheta = mu.r / static_cast<double>(n_theta);

  gen.a0 = Matrix::Zero(dim, dim);
  gen.a1 = Matrix::Zero(dim, dim);
  gen.a0.topLeftCorner(d_a, d_a) = a.a;

  for (int v = 0; v < a.n; ++v) {
    for (int l = 0; l < n_theta; ++l) {
      const Index row = gen.seg_index(v, l);
      gen.a0(row, gen.seg_index(v, l + 1)) += 1.0 / dtheta;
      gen.a0(row, row) -= 1.0 / dtheta;
    }
    // theta = 0 slot slaved to the node dynamics
    gen.a0.row(gen.seg_index(v, n_theta)).head(d_a) =
        a.a.row(a.node_index(v));
  }

  const Vector qw = delay_quadrature_weights(mu, n_theta);
  for (int v = 0; v < a.n; ++v)
    for (int l = 0; l <= n_theta; ++l)
      gen.a1(a.node_index(v), gen.seg_index(v, l)) = qw(l);

  gen.weights.resize(dim);
  gen.weights.head(d_a) = a.weights;
  for (int v = 0; v < a.n; ++v)
    for (int l = 0; l <= n_theta; ++l)
      gen.weights(gen.seg_index(v, l)) =
          dtheta * ((l == 0 || l == n_theta) ? 0.5 : 1.0);
  return gen;
}

double miyadera_voigt_bound(const DelayMeasure& mu, const NodeMatrixB& b,
                            double t0) {
  if (!(t0 > 0.0)) throw NonPositiveT0("t0 must be > 0");
  double k_sup = 0.0;
  for (Index i = 0; i < b.b.size(); ++i)
    k_sup = std::max(k_sup, std::max(1.0, std::exp(mu.r * b.b(i))));
  if (b.b.size() == 0) k_sup = 1.0;
  return std::sqrt(t0) * k_sup * mu.total_variation();
}

}  // namespace netspde
