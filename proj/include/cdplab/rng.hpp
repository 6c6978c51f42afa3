#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cdplab {

// Seeded random stream with hierarchical substream derivation. Substreams are
// derived from the stream's root seed (not from consumed state), so adding or
// removing draws in one part of a program never shifts the streams used
// elsewhere. The engine is std::mt19937_64; variate generation is done with
// explicit bit manipulation because the standard distributions are not
// bit-reproducible across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : root_(seed), engine_(mix(seed)) {}

  // Independent stream identified by (label, index) under this stream's root.
  Rng substream(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t s = root_;
    s = mix(s ^ fnv1a64(label));
    s = mix(s ^ index);
    return Rng(s);
  }

  std::uint64_t root_seed() const { return root_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
  int uniform_int(int bound) {
    if (bound <= 0) throw std::invalid_argument("uniform_int: bound must be positive");
    const std::uint64_t b = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % b);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Index drawn from an (assumed normalized) probability vector.
  int categorical(const std::vector<double>& probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;  // guard against rounding at u ~ 1
  }

  // Flat Dirichlet row: normalized unit-rate exponentials.
  std::vector<double> dirichlet(int dim) {
    std::vector<double> row(static_cast<std::size_t>(dim));
    double sum = 0.0;
    for (auto& v : row) {
      double u = uniform();
      v = -std::log1p(-u);
      if (v <= 0.0) v = 1e-300;
      sum += v;
    }
    for (auto& v : row) v /= sum;
    return row;
  }

  static std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds before they reach the engine.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t root_;
  std::mt19937_64 engine_;
};

}  // namespace cdplab
