#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucha/channel.hpp"
#include "ucha/rng.hpp"

namespace ucha::env {

/// Static traits of one VR user.
struct VuProfile {
  double cpu_hz = 6e8;        ///< local CPU frequency f_n
  double mu = 0.5;            ///< battery weight, 0 = full battery
  int tau_f = 75;             ///< required successful frames per second
  double distance_m = 10.0;   ///< distance to the server

  void validate(int slots_per_second) const;
};

enum class Battery { kHigh, kMiddle, kLow };

/// Battery label -> energy weight: High 0.1, Middle 0.5, Low 1.0.
double battery_weight(Battery b);
Battery parse_battery(const std::string& label);
std::string battery_label(Battery b);

struct Resolution {
  std::string label;
  int width = 0;
  int height = 0;
};

/// Frame sizes in bits, strictly descending: rung 0 is the best resolution.
/// Index size() is the below-ladder failure rung (size 0).
class ResolutionLadder {
 public:
  ResolutionLadder() = default;
  ResolutionLadder(std::vector<double> bits, std::vector<std::string> labels);
  static ResolutionLadder from_resolutions(std::span<const Resolution> rungs, int bits_per_pixel,
                                           int eyes_per_frame);

  [[nodiscard]] std::size_t size() const { return bits_.size(); }
  /// G at a 0-based rung; rung == size() is the zero sentinel.
  [[nodiscard]] double bits(std::size_t rung) const { return rung < bits_.size() ? bits_[rung] : 0.0; }
  [[nodiscard]] double top() const { return bits_.front(); }
  [[nodiscard]] double bottom() const { return bits_.back(); }
  [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<double> bits_;
  std::vector<std::string> labels_;
};

struct RewardWeights {
  std::vector<double> resolution{1.0, 0.7, 0.4};  ///< R_r per rung
  double fail = 1.0;       ///< R_f
  double energy = 10.0;    ///< omega_e
  double worst = 5.0;      ///< omega_end
  double terminate = 1.0;  ///< omega_f
};

/// How much data a VU can render locally in one slot.
enum class LocalBudget {
  kPerCycle,  ///< f_n * iota / c bits: the D*c cycles must fit in the slot
  kLiteral,   ///< f_n * iota read directly as bits
};

std::string to_string(LocalBudget b);
LocalBudget parse_local_budget(const std::string& s);

struct EnvConfig {
  int slots_per_second = 90;
  int num_channels = 3;
  std::vector<double> bandwidth_hz{1.8e6, 1.8e6, 1.8e6};
  double noise_psd = 3.981071705534972e-21;  // 10^-20.4 W/Hz
  double p_max = 100.0;
  double server_hz = 1e10;
  double eta = 1e-27;
  std::vector<Resolution> resolutions{{"1440p", 2560, 1440}, {"1080p", 1920, 1080}, {"720p", 1280, 720}};
  int bits_per_pixel = 16;
  int eyes_per_frame = 2;
  std::array<double, 2> compression_range{300.0, 600.0};
  std::array<double, 2> cycles_per_bit_range{50.0, 150.0};
  RewardWeights rewards;
  channel::FadingParams fading;
  double area_side_m = 30.0;
  bool early_termination = true;
  LocalBudget local_budget = LocalBudget::kPerCycle;

  [[nodiscard]] double slot_duration() const { return 1.0 / slots_per_second; }
  [[nodiscard]] ResolutionLadder ladder() const;
  void validate() const;
};

/// Random per-slot quantities.
struct SlotDraw {
  channel::ChannelGains gains;
  std::vector<double> com;  ///< compression ratio per VU
  std::vector<double> cyc;  ///< cycles per bit per VU
};

/// z[n] in {0..M}; 0 = generate locally.
struct ChannelAction {
  std::vector<int> z;
};

/// Non-negative shares of p_max summing to one.
struct PowerPortions {
  std::vector<double> share;
  void validate() const;
};

struct StepOutcome {
  std::vector<int> success;
  std::vector<double> delay;
  std::vector<double> energy;
  std::vector<double> resolution;  ///< bits; 0 on the failure rung
  std::vector<int> rung;           ///< 0-based ladder rung; ladder size = failure rung
  std::vector<double> power;
  std::vector<double> rate;
  std::vector<double> r1;
  std::vector<double> r2;
  bool terminated = false;         ///< early termination fired
  bool done = false;               ///< terminated or t == T
  std::optional<std::size_t> term_vu;
};

struct EnvState {
  int t = 0;
  std::vector<int> fail_count;
  std::vector<int> succ_count;
  SlotDraw draw;
  bool done = false;
};

// --- action codec -----------------------------------------------------------

/// sum_n z[n] * (M+1)^n with VU 0 as the least significant digit.
std::uint64_t encode_action(const ChannelAction& action, int num_channels);
/// Inverse of encode_action; throws std::out_of_range for index >= (M+1)^N.
ChannelAction decode_action(std::uint64_t index, int num_vus, int num_channels);
/// (M+1)^N; throws std::overflow_error if it does not fit in 63 bits.
std::uint64_t action_space_size(int num_vus, int num_channels);

// --- physical layer ---------------------------------------------------------

/// p[n] = share[n]*p_max when z[n] != 0, else 0. The sum over VUs (in index
/// order) never exceeds p_max, even under rounding.
std::vector<double> portions_to_power(const PowerPortions& portions, const ChannelAction& action,
                                      double p_max);

/// VUs on `channel` (1-based, as in z) ordered by |h|^2/noise descending,
/// ties broken by larger VU index first.
std::vector<std::size_t> sic_order(int channel, const ChannelAction& action,
                                   const channel::ChannelGains& gains, double noise_psd);

/// Per-VU NOMA rate in bits/s after SIC; 0 for local VUs.
std::vector<double> achievable_rates(const ChannelAction& action, std::span<const double> power,
                                     const channel::ChannelGains& gains, const EnvConfig& config);

inline double frame_size(double res_bits, double com) { return res_bits / com; }

/// Execution plus transmission time; +inf when rate is zero.
double server_delay(double frame_bits, double cycles_per_bit, double server_hz, double rate);

/// mu * D * c * eta * f^2 for local generation, 0 when served by the server.
double local_energy(double frame_bits, double cycles_per_bit, const VuProfile& profile, double eta,
                    int z);

struct LocalFrame {
  double resolution = 0.0;  ///< G at `rung`, 0 below the ladder
  std::size_t rung = 0;
};

/// Largest compressed frame (bits) the VU can render locally this slot.
double local_capacity(const VuProfile& profile, double cycles_per_bit, const EnvConfig& config);

/// Best rung whose compressed size fits in `capacity_bits`.
LocalFrame local_resolution(double capacity_bits, double com, const ResolutionLadder& ladder);

int success_flag(int z, double delay, double slot_duration, double resolution, double lowest_bits);

// --- observations -----------------------------------------------------------

std::size_t agent1_state_dim(std::size_t num_vus, std::size_t num_channels);
std::size_t agent2_state_dim(std::size_t num_vus, std::size_t num_channels);

/// Per VU: [frame size, remaining tolerable failures, |h|^2 per channel, FPS
/// gap], then remaining slots. See docs/formats.md for the scaling.
std::vector<double> build_state_agent1(const EnvState& state, std::span<const VuProfile> profiles,
                                       const EnvConfig& config);
/// Decoded assignment z/M followed by s1.
std::vector<double> build_state_agent2(std::span<const double> s1, const ChannelAction& action,
                                       int num_channels);

// --- dynamics ---------------------------------------------------------------

SlotDraw draw_slot(std::span<const VuProfile> profiles, const EnvConfig& config,
                   rng::RandomStream& fading, rng::RandomStream& frames);

/// Applies one slot. Throws std::logic_error if `state` is already done.
/// The returned state's draw is empty; VrEnv fills it.
std::pair<StepOutcome, EnvState> apply_slot(const EnvState& state, const ChannelAction& action,
                                            const PowerPortions& portions,
                                            std::span<const VuProfile> profiles,
                                            const EnvConfig& config);

/// Uniform sampling ranges for scenario generation.
struct ProfileSampling {
  std::array<double, 2> cpu_ghz{0.3, 0.9};
  std::array<int, 2> tau_f{60, 90};
};

/// Per-VU overrides from the scenario file; unset fields are sampled.
struct VuOverride {
  std::optional<double> cpu_ghz;
  std::optional<Battery> battery;
  std::optional<int> tau_f;
  std::optional<double> distance_m;
};

std::vector<VuProfile> sample_profiles(std::size_t num_vus, const EnvConfig& config,
                                       const ProfileSampling& sampling,
                                       std::span<const VuOverride> overrides,
                                       rng::RandomStream& stream);

/// Episodic simulator owning its streams.
class VrEnv {
 public:
  VrEnv(EnvConfig config, std::vector<VuProfile> profiles, rng::RandomStream stream);

  const EnvState& reset();
  StepOutcome step(const ChannelAction& action, const PowerPortions& portions);

  [[nodiscard]] const EnvState& state() const { return state_; }
  [[nodiscard]] const EnvConfig& config() const { return config_; }
  [[nodiscard]] std::span<const VuProfile> profiles() const { return profiles_; }
  [[nodiscard]] std::size_t num_vus() const { return profiles_.size(); }
  [[nodiscard]] int num_channels() const { return config_.num_channels; }
  [[nodiscard]] std::vector<double> observe_agent1() const;

 private:
  EnvConfig config_;
  std::vector<VuProfile> profiles_;
  rng::RandomStream fading_;
  rng::RandomStream frames_;
  EnvState state_;
};

}  // namespace ucha::env
