#include "smc/rng.hpp"

#include <cmath>

namespace smc {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Absorbs (seed, key) into a single 64-bit digest; every word passes through
// a full SplitMix64 finalizer so nearby keys land far apart.
std::uint64_t digest(std::uint64_t seed, const StreamKey& key) {
  std::uint64_t h = seed;
  std::uint64_t out = splitmix64(h);
  for (std::uint64_t word : key) {
    h ^= word + 0x632be59bd9b4e019ULL + (out << 6) + (out >> 2);
    out = splitmix64(h);
  }
  return out;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, StreamKey key) : seed_(seed), key_(key) {
  std::uint64_t sm = digest(seed, key);
  for (auto& word : state_) word = splitmix64(sm);
  // xoshiro must not start from the all-zero state.
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

RngStream RngStream::derive(StreamPurpose purpose, std::uint64_t time,
                            std::uint64_t index, std::uint64_t trial) const {
  return RngStream(digest(seed_, key_),
                   {static_cast<std::uint64_t>(purpose), time, index, trial});
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  // (k + 0.5) / 2^53 for k in [0, 2^53) never hits 0 or 1.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::exponential() { return -std::log(uniform_open()); }

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * factor;
  has_cached_normal_ = true;
  return u * factor;
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  // Lemire's nearly-divisionless bounded draw.
  unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>((*this)()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace smc
