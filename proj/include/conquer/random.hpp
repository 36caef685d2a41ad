#pragma once

#include <cstdint>
#include <random>

namespace conquer {

//! SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Independent stream seed for (master seed, stream index, purpose tag).
//! Pure function of its arguments, so parallel schedules cannot change it.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t tag = 0)
{
  return mix64(mix64(seed ^ mix64(tag)) + mix64(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

} // namespace conquer
