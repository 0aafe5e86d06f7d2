#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace lelp {

// splitmix64 stream. Fully specified arithmetic so that every seeded run
// reproduces bit-for-bit on any platform, independent of the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller (two uniforms per sample).
  double normal();

  // Uniform integer in [0, n), unbiased. n must be positive.
  std::size_t below(std::size_t n);

 private:
  std::uint64_t state_;
};

// Order-sensitive seed derivation for independent sub-streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::string_view tag);
std::uint64_t mix_seed(std::uint64_t a, std::string_view tag, std::uint64_t b);

// Fisher-Yates permutation of 0..n-1 drawn from rng.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace lelp
