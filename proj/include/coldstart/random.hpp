#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace coldstart {

// Portable pseudo-random generation.
//
// Everything stochastic in the toolkit (synthetic worlds, random retrieval,
// user sampling, bootstrap) draws from Xoshiro256** seeded through SplitMix64.
// The standard library distributions are implementation-defined, so the
// uniform/normal/index transforms below are spelled out here instead.

std::uint64_t splitmix64(std::uint64_t& state);

// Mixes a base seed with a sequence of stream identifiers (pipeline hash,
// user ordinal, ...) into an independent sub-seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

// FNV-1a, used to turn names (pipelines, tags) into stream identifiers.
std::uint64_t fnv1a64(std::string_view text);

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform on (0, 1); never returns 0.
  double uniform_open();
  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);
  // Standard normal (Marsaglia polar method).
  double normal();
  // Standard Gumbel.
  double gumbel();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coldstart
