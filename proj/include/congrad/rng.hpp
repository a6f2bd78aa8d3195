#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace congrad {

// Counter-based generator: each draw mixes (key, counter) through the
// splitmix64 finalizer. Streams are identified by (seed, stream) and can be
// split without sharing mutable state, so parallel workers stay independent
// and every draw is reproducible from the pair alone.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++ctr_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // {0, ..., n-1}
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
  }

  // Box-Muller; always consumes exactly two draws
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // derived stream, independent of this one for distinct tags
  RngStream split(std::uint64_t tag) const { return RngStream(key_, tag); }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace congrad
