#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace emoclim {

using Rng = std::mt19937_64;

// FNV-1a, used only to turn subsystem labels into seed material.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Every random stream in a run is derived from the single run seed plus a
// fixed label, so adding a consumer never perturbs the others.
inline Rng derive_rng(std::uint64_t seed, std::string_view label) {
  const std::uint64_t h = fnv1a(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng{seq};
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return derive_rng(seed, label)();
}

}  // namespace emoclim
