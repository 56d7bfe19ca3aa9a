#pragma once

#include <cmath>
#include <cstdint>

namespace lgm {

// Counter-keyed random stream. One master seed spawns one independent
// substream per (round, index) pair, so draws do not depend on execution
// order or thread count.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t round, std::uint64_t index)
      : state_(mix(mix(mix(seed) ^ GOLDEN * round) ^ GOLDEN * (index + 1))) {}

  std::uint64_t next_u64() {
    state_ += GOLDEN;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() {
    // Box-Muller; the sine branch is discarded to keep the stream stateless.
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze, boosted for shape < 1.
  double next_gamma(double shape) {
    if (shape < 1.0) {
      const double u = next_uniform();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double next_chisq(double dof) { return 2.0 * next_gamma(0.5 * dof); }

 private:
  static constexpr std::uint64_t GOLDEN = 0x9e3779b97f4a7c15ULL;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += GOLDEN;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace lgm
