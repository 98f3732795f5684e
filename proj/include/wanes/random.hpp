#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace wanes {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// (master seed, stream id, index) triple without any sequential state, so
/// adding replications never shifts the streams of existing ones.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                           std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream) ^ index);
}

/// Named stream ids; distinct constants keep perturbation and attack draws apart.
namespace streams {
inline constexpr std::uint64_t kPerturbation = 0x6f6d656761ULL;  // "omega"
inline constexpr std::uint64_t kAttack = 0x61747461636bULL;      // "attack"
inline constexpr std::uint64_t kGrowth = 0x67726f777468ULL;      // "growth"
inline constexpr std::uint64_t kAudit = 0x6175646974ULL;         // "audit"
}  // namespace streams

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

inline double uniform01(Rng& rng) {
  // 53 random mantissa bits; avoids implementation-defined generate_canonical.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Symmetric Dirichlet(c) sample written into `out`.
inline void sample_dirichlet(Rng& rng, double concentration, std::span<double> out) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  double total = 0.0;
  for (double& x : out) {
    x = gamma(rng);
    total += x;
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed (tiny concentration): fall back to a vertex.
    std::uniform_int_distribution<std::size_t> pick(0, out.size() - 1);
    for (double& x : out) x = 0.0;
    out[pick(rng)] = 1.0;
    return;
  }
  for (double& x : out) x /= total;
}

}  // namespace wanes
