#ifndef NNDE_RANDOM_HPP
#define NNDE_RANDOM_HPP

#include <cstdint>
#include <random>

namespace nnde {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from a run seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nnde

#endif  // NNDE_RANDOM_HPP
