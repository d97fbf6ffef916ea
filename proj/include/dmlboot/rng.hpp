#pragma once

#include <cstdint>
#include <random>

namespace dmlboot {

/// Random engine used throughout. All samplers are pure functions of an
/// explicit 64-bit seed so that results never depend on call order or on
/// how work is split across threads.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer: a bijective avalanche mix of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a stream seed from a base seed and up to three indices
/// (replication, draw, fold, ...). Distinct index tuples give decorrelated
/// streams, which keeps parallel schedules reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i0,
                                 std::uint64_t i1 = 0, std::uint64_t i2 = 0) {
  std::uint64_t s = mix64(base);
  s = mix64(s ^ i0);
  s = mix64(s ^ i1);
  s = mix64(s ^ i2);
  return s;
}

/// Construct an engine from a seed, passing it through the mixer first so
/// that consecutive seeds do not produce correlated initial states.
inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

}  // namespace dmlboot
