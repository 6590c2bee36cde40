#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace shrinkpred {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Deterministic child seed for (parent, index...). Streams derived from
/// different index paths do not overlap in practice.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (std::uint64_t p : path) {
    s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  }
  return s;
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32U)};
  return Rng(seq);
}

/// Stream tags used when deriving per-replication seeds.
enum class Stream : std::uint64_t { data = 1, future = 2, integration = 3, proposal = 4 };

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s)});
}

}  // namespace shrinkpred
