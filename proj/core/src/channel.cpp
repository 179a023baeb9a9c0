#include "ucha/channel.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ucha::channel {

void FadingParams::validate() const {
  if (!(beta0 > 0.0) || !std::isfinite(beta0)) throw std::invalid_argument("fading.beta0 must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("fading.alpha must be >= 0");
  if (!(rician_k >= 0.0)) throw std::invalid_argument("fading.rician_k must be >= 0");
}

double large_scale(double distance_m, const FadingParams& params) {
  if (distance_m < 1.0) {
    spdlog::warn("large_scale: distance {} m below the 1 m reference, clamped", distance_m);
    distance_m = 1.0;
  }
  return params.beta0 * std::pow(distance_m, -params.alpha);
}

std::complex<double> small_scale(rng::RandomStream& stream, const FadingParams& params) {
  const double k = params.rician_k;
  if (std::isinf(k)) return {1.0, 0.0};
  const std::complex<double> scattered = rng::sample_complex_normal(stream);
  const std::complex<double> los{1.0, 0.0};
  return std::sqrt(k / (k + 1.0)) * los + std::sqrt(1.0 / (k + 1.0)) * scattered;
}

ChannelGains draw_slot_gains(std::span<const double> distances_m, std::size_t num_channels,
                             const FadingParams& params, rng::RandomStream& stream) {
  if (distances_m.empty() || num_channels == 0) {
    throw std::invalid_argument("draw_slot_gains: need at least one VU and one channel");
  }
  ChannelGains gains(distances_m.size(), num_channels);
  for (std::size_t n = 0; n < distances_m.size(); ++n) {
    const double amplitude = std::sqrt(large_scale(distances_m[n], params));
    for (std::size_t m = 0; m < num_channels; ++m) {
      gains.at(n, m) = amplitude * small_scale(stream, params);
    }
  }
  return gains;
}

}  // namespace ucha::channel
