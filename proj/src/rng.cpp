#include "tarsp/rng.hpp"

namespace tarsp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index,
                          std::uint64_t subindex) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ index);
  return splitmix64(h ^ (subindex * 0xd1b54a32d192ed03ULL));
}

Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index,
                   std::uint64_t subindex) {
  const std::uint64_t s = derive_seed(seed, stream, index, subindex);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Engine(seq);
}

}  // namespace tarsp
