#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace saros {

/// Malformed input data; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration value (bad fraction, zero dimension, ...).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runtime data problem (non-finite input, shape mismatch, undefined metric).
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A corpus (or a filtered corpus) ended up with no usable interactions.
class EmptyCorpusError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic pseudo-random source. All floating-point draws are mapped
/// from raw 64-bit output explicitly so sequences are identical across
/// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(detail::splitmix64(seed)) {
    if (state_ == 0) state_ = 0x853c49e6748fea9bULL;  // xorshift state must be nonzero
  }

  std::uint64_t next_u64() {
    // xorshift* keeps the generator self-contained and reproducible.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Independent stream derived from this generator's seed.
  Rng fork(std::uint64_t stream) const {
    return Rng(detail::splitmix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace saros
