#pragma once

#include <cstdint>
#include <random>

namespace treeseg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent generator for stream `key` of `seed`.
inline std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t key) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(key + 1)));
}

}  // namespace treeseg
