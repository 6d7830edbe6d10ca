#pragma once

#include <cmath>
#include <cstdint>

namespace dualhsic {

// Deterministic counter-based random stream (SplitMix64). The i-th output is
// a pure function of (seed, i), so identical seeds replay identical streams
// on every platform. Streams can be split into independent child streams,
// which keeps parallel consumers order-independent.
class RngState {
 public:
  RngState() : RngState(0) {}
  explicit RngState(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Restores a stream mid-flight (checkpoint resumption).
  static RngState restore(std::uint64_t seed, std::uint64_t counter) {
    RngState r(seed);
    r.counter_ = counter;
    return r;
  }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t u = next_u64();
      if (u >= threshold) return u % n;
    }
  }

  // Standard normal via Box-Muller; consumes two raw draws per value.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), defined on [0,1)
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Independent child stream. Distinct ids yield decorrelated streams and the
  // derivation commutes with the parent's consumption position.
  RngState split(std::uint64_t stream_id) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ULL * (stream_id + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return RngState(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace dualhsic
