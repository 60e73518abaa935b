#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lac {

using Rng = std::mt19937_64;

/// Derives an independent, reproducible substream seed from a scenario seed,
/// a stream name and an optional index (SplitMix64 over an FNV-1a name hash).
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ h) ^ index);
}

inline Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(substream_seed(seed, name, index));
}

}  // namespace lac
