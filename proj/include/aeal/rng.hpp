#pragma once

#include <cstdint>
#include <random>

namespace aeal {

using Rng = std::mt19937_64;

// splitmix64 finalizer; gives well-separated child seeds for replications.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream) { return Rng(derive_seed(base, stream)); }

/// Uniform draw on the open interval (0, 1).
inline double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return u;
}

}  // namespace aeal
