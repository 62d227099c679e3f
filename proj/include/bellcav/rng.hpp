#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bellcav {

/// Counter-style splittable random stream (splitmix64). One 64-bit state,
/// forkable per trial, identical sequences for identical seeds on any
/// platform (no dependence on std::uniform_real_distribution internals).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  int next_bit() { return static_cast<int>(next_u64() >> 63); }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derive the seed of an independent substream. Substream k of a master seed
/// is a fixed function of (master, k), so results never depend on the order
/// in which streams are consumed or on how work is split across threads.
inline std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t stream_id) {
  return detail::mix64(master_seed + (stream_id + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Flat (Dirichlet(1,...,1)) sample from the probability simplex.
inline std::vector<double> sample_simplex(RandomStream& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_simplex: dimension must be >= 1");
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Exponential via inverse CDF; 1 - u avoids log(0).
    double u = rng.next_double();
    w[i] = -std::log(1.0 - u);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace bellcav
