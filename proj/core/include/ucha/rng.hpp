#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <string_view>

namespace ucha::rng {

/// xoshiro256** generator seeded through splitmix64.
///
/// Satisfies UniformRandomBitGenerator so it can drive std::shuffle, but all
/// distribution sampling in the project goes through the free functions
/// below; the std:: distributions are implementation-defined and would break
/// cross-toolchain reproducibility.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0);

  /// Child stream keyed by `name`. The child's state depends only on this
  /// stream's seed and the name, never on how many draws the parent made.
  [[nodiscard]] RandomStream substream(std::string_view name) const;

  std::uint64_t next();
  result_type operator()() { return next(); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// Uniform double in [0, 1) with 53 random mantissa bits.
double sample_unit(RandomStream& stream);

/// Uniform double in [lo, hi). Throws std::invalid_argument unless lo < hi.
double sample_uniform(RandomStream& stream, double lo, double hi);

/// Uniform integer in [lo, hi] (inclusive), unbiased.
std::int64_t sample_int(RandomStream& stream, std::int64_t lo, std::int64_t hi);

/// One N(0,1) draw (Box-Muller; the sine branch is discarded).
double sample_std_normal(RandomStream& stream);

/// Circularly-symmetric complex normal with E|x|^2 = 1.
std::complex<double> sample_complex_normal(RandomStream& stream);

}  // namespace ucha::rng
