#pragma once

// Reference implementations written independently of the library code,
// favouring directness over speed.

#include <cstdint>
#include <functional>
#include <vector>

#include "ucha/neural.hpp"
#include "ucha/rng.hpp"

namespace oracle {

/// SIC rates by permutation search: for each channel, the decoding order is
/// the unique permutation whose neighbours satisfy either a strictly larger
/// gain-to-noise ratio or, on equality, a larger index first. Interference to
/// the user at position v is the sum of the earlier users' powers times the
/// user's own channel gain.
std::vector<double> brute_force_rates(const std::vector<int>& z, const std::vector<double>& power,
                                      const std::vector<std::vector<double>>& gain_sq,  // [n][m]
                                      const std::vector<double>& bandwidth, double noise_psd);

/// A_t = sum_{l>=0} (gamma*lambda)^l delta_{t+l}, stopping after the first
/// done step. values has T+1 entries.
std::vector<double> gae_double_sum(const std::vector<double>& rewards, const std::vector<double>& values,
                                   const std::vector<std::uint8_t>& done, double gamma, double lambda);

/// First rung j (0-based) with bits[j]/com <= budget by linear scan; bits.size() if none.
std::size_t linear_scan_rung(const std::vector<double>& bits, double com, double budget);

/// Central finite difference of f at x[i].
double central_difference(const std::function<double()>& f, double& x, double h);

struct GradCheck {
  double max_rel = 0.0;
  double analytic_at_max = 0.0;
  double numeric_at_max = 0.0;
  int checked = 0;
};

/// Compares analytic gradients against central differences at `samples`
/// parameter coordinates drawn uniformly over all blocks. `analytic` must
/// mirror the layout of `params`.
GradCheck check_gradient(const std::vector<ucha::nn::Block>& params, const std::vector<ucha::nn::Block>& analytic,
                         const std::function<double()>& loss, int samples, ucha::rng::RandomStream& stream,
                         double h = 1e-6, double floor = 1e-6);

/// rel = |a - b| / max(|a|, |b|, floor)
double rel_err(double a, double b, double floor = 1e-6);

/// Moment estimate of the Rician K-factor: |E g|^2 / Var(g).
struct KEstimate {
  double k = 0.0;
  double mean_power = 0.0;
};
KEstimate estimate_k(const std::vector<double>& re, const std::vector<double>& im);

/// Base-(M+1) digits by repeated division, least significant first.
std::vector<int> digits(std::uint64_t index, int num_digits, int base);

}  // namespace oracle
