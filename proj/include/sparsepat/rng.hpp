#pragma once

#include <cmath>
#include <cstdint>

namespace sparsepat {

// Deterministic 64-bit generator (SplitMix64). The std:: distributions are
// implementation-defined, so every random draw in the project goes through
// this class to keep outputs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Box-Muller; draws two uniforms per call, no caching so the stream is a
  // pure function of the call sequence.
  double gaussian(double mu, double sigma) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  uint64_t state_;
};

// Splittable counter scheme: sub-stream seeds are a pure function of
// (master, index), so parallel per-sample generation is order-independent.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  Rng r(master ^ (0xA0761D6478BD642FULL * (index + 1)));
  return r.next_u64();
}

}  // namespace sparsepat
