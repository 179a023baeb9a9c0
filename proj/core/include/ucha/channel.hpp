#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ucha/rng.hpp"

namespace ucha::channel {

/// Path loss and Rician fading constants. beta0 is the linear power gain at
/// the 1 m reference distance.
struct FadingParams {
  double beta0 = 1e-3;
  double alpha = 2.0;
  double rician_k = 3.0;

  /// Throws std::invalid_argument when any field is out of its domain.
  void validate() const;
};

/// Complex gains h[n][m] for one slot, row-major N x M.
class ChannelGains {
 public:
  ChannelGains() = default;
  ChannelGains(std::size_t num_vus, std::size_t num_channels)
      : num_vus_(num_vus), num_channels_(num_channels), h_(num_vus * num_channels) {}

  [[nodiscard]] std::size_t num_vus() const { return num_vus_; }
  [[nodiscard]] std::size_t num_channels() const { return num_channels_; }

  std::complex<double>& at(std::size_t n, std::size_t m) { return h_[n * num_channels_ + m]; }
  [[nodiscard]] const std::complex<double>& at(std::size_t n, std::size_t m) const {
    return h_[n * num_channels_ + m];
  }
  /// |h[n][m]|^2
  [[nodiscard]] double power(std::size_t n, std::size_t m) const { return std::norm(at(n, m)); }

 private:
  std::size_t num_vus_ = 0;
  std::size_t num_channels_ = 0;
  std::vector<std::complex<double>> h_;
};

/// beta0 * L^-alpha. Distances below the 1 m reference are clamped (with a
/// warning).
double large_scale(double distance_m, const FadingParams& params);

/// sqrt(K/(K+1)) * los + sqrt(1/(K+1)) * g~ with los = 1+0i and g~ ~ CN(0,1).
/// An infinite K yields the LOS term alone and consumes no randomness.
std::complex<double> small_scale(rng::RandomStream& stream, const FadingParams& params);

/// One fresh draw per (VU, channel): h = sqrt(large_scale(L_n)) * small_scale().
ChannelGains draw_slot_gains(std::span<const double> distances_m, std::size_t num_channels,
                             const FadingParams& params, rng::RandomStream& stream);

}  // namespace ucha::channel
