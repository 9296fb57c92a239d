#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sdoh {

// Deterministic randomness. std::mt19937_64 has a standard-fixed output
// sequence; the bounded draw and the Fisher-Yates shuffle below replace
// std::uniform_int_distribution / std::shuffle, whose results are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n), n > 0.
  std::size_t bounded(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = bounded(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent per-stream seed (splitmix64 finalizer).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sdoh
