#pragma once

// Counter-based random streams.
//
// Every stochastic operation draws from a stream identified by
// (run seed, purpose label, index). The stream seed is
//
//   h0 = mix(seed + G)
//   h1 = mix(h0 ^ fnv1a64(label))
//   h2 = mix(h1 ^ (index * M + G))
//
// with G = 0x9E3779B97F4A7C15, M = 0xD1B54A32D192ED03 and `mix` the SplitMix64
// finalizer. The stream itself is a SplitMix64 generator started at h2.
// Because a stream depends only on its key, work can be chunked across any
// number of threads without changing the draws.

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace sfbd {

constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t index) {
  constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t h = splitmix_finalize(seed + kGolden);
  h = splitmix_finalize(h ^ fnv1a64(label));
  return splitmix_finalize(h ^ (index * 0xD1B54A32D192ED03ULL + kGolden));
}

// SplitMix64 as a UniformRandomBitGenerator, with Gaussian/uniform helpers.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t state) : state_(state) {}
  Stream(std::uint64_t seed, std::string_view label, std::uint64_t index)
      : state_(stream_seed(seed, label, index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix_finalize(state_);
  }

  double normal() { return normal_(*this); }
  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 64>(*this); }
  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(*this);
  }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sfbd
