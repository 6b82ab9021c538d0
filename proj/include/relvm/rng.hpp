#pragma once

#include <cmath>
#include <cstdint>

#include "relvm/array.hpp"

namespace relvm {

// Counter-based random stream (SplitMix64 over a seed/stream-derived base).
// The triple (seed, stream_id, counter) fully determines every draw, so any
// consumer can be replayed independently of call interleaving elsewhere.
// Distinct stream_ids give unrelated sequences.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  RngStream() = default;
  RngStream(std::uint64_t seed_, std::uint64_t stream_id_, std::uint64_t counter_ = 0)
      : seed(seed_), stream_id(stream_id_), counter(counter_) {}

  static std::uint64_t avalanche(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t base() const {
    return avalanche(avalanche(seed + 0x9E3779B97F4A7C15ull) ^
                     avalanche(stream_id * 0xD1B54A32D192ED03ull + 0x8BB84B93962EACC9ull));
  }

  std::uint64_t next_u64() {
    ++counter;
    return avalanche(base() + counter * 0x9E3779B97F4A7C15ull);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; avoids log(0) in Box-Muller.
  double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (cosine branch; two u64s per draw).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  Array normal_array(std::size_t n) {
    Array a({n});
    for (std::size_t i = 0; i < n; ++i) a.v[i] = normal();
    return a;
  }

  // Decoupled child stream; independent of the parent's counter position.
  RngStream fork(std::uint64_t salt) const {
    return RngStream(seed, avalanche(stream_id * 0x9E3779B97F4A7C15ull + salt + 1));
  }
};

}  // namespace relvm
