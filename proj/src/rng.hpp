#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sace {

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Purpose tags keep the streams of different pipeline stages decoupled, so a
// run is bit-reproducible whether replicates execute serially or in parallel.
enum class RngPurpose : std::uint64_t {
  kScience = 1,
  kAssignment = 2,
  kOracle = 3,
  kBootstrap = 4,
};

// A deterministic stream keyed by (seed, purpose, index). Every replicate /
// cluster draw owns its own stream; no engine state is ever shared.
class RngStream {
 public:
  RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t index)
      : engine_(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(purpose)) ^
                      mix64(index ^ 0xa5a5a5a5a5a5a5a5ULL))) {}

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1)
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, second variate discarded: one normal per two engine draws.
  double normal(double mean, double sd) {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double logistic() {
    const double u = uniform_open();
    return std::log(u) - std::log1p(-u);
  }

  // inclusive on both ends, unbiased via rejection
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % range);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sace
