#pragma once

#include <cstdint>
#include <random>

namespace ceunet {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for a named stream. Streams used across the pipeline:
enum class Stream : std::uint64_t {
  Split = 1,
  Cluster = 2,
  Network = 3,
  Weights = 4,
  Reducer = 5,
  Trial = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                    std::uint64_t index = 0) {
  return mix_seed(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(stream))) + index);
}

}  // namespace ceunet
