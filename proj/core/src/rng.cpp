#include "ucha/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ucha::rng {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// FNV-1a; only used to key substreams, so collisions just alias two names.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) word = splitmix64(x);
}

RandomStream RandomStream::substream(std::string_view name) const {
  std::uint64_t x = seed_ ^ hash_name(name);
  return RandomStream(splitmix64(x));
}

std::uint64_t RandomStream::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double sample_unit(RandomStream& stream) {
  return static_cast<double>(stream.next() >> 11) * 0x1.0p-53;
}

double sample_uniform(RandomStream& stream, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("sample_uniform: require lo < hi");
  const double v = lo + (hi - lo) * sample_unit(stream);
  // Rounding in lo + (hi-lo)*u can land exactly on hi.
  return v < hi ? v : std::nextafter(hi, lo);
}

std::int64_t sample_int(RandomStream& stream, std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("sample_int: require lo <= hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(stream.next());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = stream.next();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double sample_std_normal(RandomStream& stream) {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - sample_unit(stream);
  const double u2 = sample_unit(stream);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> sample_complex_normal(RandomStream& stream) {
  const double re = sample_std_normal(stream);
  const double im = sample_std_normal(stream);
  return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
}

}  // namespace ucha::rng
