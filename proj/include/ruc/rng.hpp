#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ruc {

using Rng = std::mt19937_64;

/// Mixes a master seed with a list of stream tags into an independent seed.
/// Every stochastic stage draws from its own derived stream so that adding or
/// removing draws in one stage leaves the others untouched.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(master, tags));
}

// Stream tags.
enum StreamTag : std::uint64_t {
  kStreamData = 0x11,
  kStreamNoise,
  kStreamInit,
  kStreamBatch,
  kStreamAugment,
  kStreamSmoothing,
  kStreamMixup,
  kStreamProjection,
  kStreamBaseline,
};

/// Beta(a, a) via two Gamma draws.
double sample_symmetric_beta(double a, Rng& rng);

}  // namespace ruc
