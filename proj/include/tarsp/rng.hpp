#pragma once

#include <cstdint>
#include <random>

namespace tarsp {

/// All randomness goes through std::mt19937_64 engines. Engines are never
/// shared between independent pieces of work; each one is seeded from
/// (user seed, stream tag, index...) through a SplitMix64 hash, so adding a
/// cache, a thread or a new consumer never shifts another consumer's draws.
using Engine = std::mt19937_64;

enum class Stream : std::uint64_t {
  Posterior = 0x5053,
  Kriging = 0x4b52,
  Covariates = 0x434f,
  Field = 0x4649,
  Missing = 0x4d49,
  Motivation = 0x4d4f,
  Replicate = 0x5245,
  Oracle = 0x4f52,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0,
                          std::uint64_t subindex = 0);

Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0,
                   std::uint64_t subindex = 0);

}  // namespace tarsp
