#pragma once

#include <cstdint>
#include <limits>

namespace l0trunc {

// SplitMix64. Cheap to construct, so every sample / attack / trial gets its
// own stream keyed by (seed, stream index) and parallel runs reproduce the
// serial one.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  g();
  return g();
}

inline SplitMix64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(mix_seed(seed, stream));
}

// Stream tags keep independent consumers of one user seed apart.
enum class StreamTag : std::uint64_t {
  kSampling = 1,
  kInit = 2,
  kShuffle = 3,
  kAttack = 4,
  kAdversary = 5,
  kSplit = 6,
  kProfile = 7,
};

inline std::uint64_t tagged_seed(std::uint64_t seed, StreamTag tag) {
  return mix_seed(seed, static_cast<std::uint64_t>(tag) << 56);
}

}  // namespace l0trunc
