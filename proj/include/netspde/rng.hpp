#pragma once

#include <cstdint>

namespace netspde {

/// splitmix64 finalizer; bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Stateless counter-based gaussian stream. Keyed by (master seed, path,
/// step); slot i always yields the same standard normal, independent of
/// evaluation order, so parallel schedules reproduce bit-identical noise.
class CounterRng {
 public:
  CounterRng(std::uint64_t master_seed, std::uint64_t path, std::uint64_t step)
      : base_(mix64(mix64(mix64(master_seed) + path) + step)) {}

  double normal(std::uint64_t slot) const {
    const std::uint64_t a = mix64(base_ + 2 * slot);
    const std::uint64_t b = mix64(base_ + 2 * slot + 1);
    return box_muller(to_unit(a), to_unit(b));
  }

 private:
  static double to_unit(std::uint64_t x) {
    // strictly inside (0,1)
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }
  static double box_muller(double u1, double u2);

  std::uint64_t base_;
};

}  // namespace netspde
