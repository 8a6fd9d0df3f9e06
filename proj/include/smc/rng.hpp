#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace smc {

// Labels for the first slot of a stream key. Each consumer of randomness
// derives its own substream so results do not depend on call order.
enum class StreamPurpose : std::uint64_t {
  kGeneric = 0,
  kInit = 1,
  kAncestors = 2,
  kPropagate = 3,
  kBackwardInit = 4,
  kBackwardPropose = 5,
  kBackwardAccept = 6,
  kBackwardFallback = 7,
  kBackwardDirect = 8,
  kObservations = 9,
  kSelftest = 10,
};

using StreamKey = std::array<std::uint64_t, 4>;

// Seeded random stream keyed by (purpose, time, index, trial).
//
// The engine is xoshiro256++ (period 2^256 - 1); its state is expanded from
// (seed, key) with SplitMix64, so identical (seed, key) pairs reproduce the
// same sequence and derivation has no side effects on the parent.
// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, StreamKey key = {0, 0, 0, 0});

  // Child stream with the given key. The child's identity hashes in this
  // stream's (seed, key), never its current position.
  RngStream derive(StreamPurpose purpose, std::uint64_t time = 0,
                   std::uint64_t index = 0, std::uint64_t trial = 0) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Standard exponential, strictly positive.
  double exponential();
  double normal();
  // Uniform integer in [0, bound), bound > 0 (Lemire's method).
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t seed() const { return seed_; }
  const StreamKey& key() const { return key_; }

 private:
  std::uint64_t seed_;
  StreamKey key_;
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace smc
