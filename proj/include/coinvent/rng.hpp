#pragma once

#include <cstdint>
#include <random>

namespace coinvent {

/// SplitMix64 finalizer; used to spread seeds before seeding mt19937_64.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `tag` of `seed`. Streams with distinct tags are
/// statistically independent for practical purposes.
constexpr std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 makeStream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(deriveSeed(seed, tag));
}

}  // namespace coinvent
