#include "ucha/vr_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ucha::env {

void VuProfile::validate(int slots_per_second) const {
  if (!(cpu_hz > 0.0)) throw std::invalid_argument("vu.cpu must be > 0");
  if (!(mu >= 0.0)) throw std::invalid_argument("vu.mu must be >= 0");
  if (tau_f < 0 || tau_f > slots_per_second) throw std::invalid_argument("vu.tau_f must be in [0, T]");
  if (!(distance_m >= 1.0)) throw std::invalid_argument("vu.distance must be >= 1 m");
}

double battery_weight(Battery b) {
  switch (b) {
    case Battery::kHigh: return 0.1;
    case Battery::kMiddle: return 0.5;
    case Battery::kLow: return 1.0;
  }
  return 0.5;
}

Battery parse_battery(const std::string& label) {
  if (label == "high") return Battery::kHigh;
  if (label == "middle") return Battery::kMiddle;
  if (label == "low") return Battery::kLow;
  throw std::invalid_argument("unknown battery label '" + label + "' (expected high|middle|low)");
}

std::string battery_label(Battery b) {
  switch (b) {
    case Battery::kHigh: return "high";
    case Battery::kMiddle: return "middle";
    case Battery::kLow: return "low";
  }
  return "middle";
}

ResolutionLadder::ResolutionLadder(std::vector<double> bits, std::vector<std::string> labels)
    : bits_(std::move(bits)), labels_(std::move(labels)) {
  if (bits_.empty()) throw std::invalid_argument("resolution ladder is empty");
  if (labels_.size() != bits_.size()) throw std::invalid_argument("ladder labels/bits size mismatch");
  for (std::size_t j = 0; j < bits_.size(); ++j) {
    if (!(bits_[j] > 0.0)) throw std::invalid_argument("ladder frame sizes must be > 0");
    if (j > 0 && !(bits_[j] < bits_[j - 1])) {
      throw std::invalid_argument("ladder frame sizes must be strictly descending");
    }
  }
}

ResolutionLadder ResolutionLadder::from_resolutions(std::span<const Resolution> rungs, int bits_per_pixel,
                                                    int eyes_per_frame) {
  std::vector<double> bits;
  std::vector<std::string> labels;
  for (const auto& r : rungs) {
    bits.push_back(static_cast<double>(r.width) * r.height * bits_per_pixel * eyes_per_frame);
    labels.push_back(r.label);
  }
  return ResolutionLadder(std::move(bits), std::move(labels));
}

ResolutionLadder EnvConfig::ladder() const {
  return ResolutionLadder::from_resolutions(resolutions, bits_per_pixel, eyes_per_frame);
}

void EnvConfig::validate() const {
  if (slots_per_second < 1) throw std::invalid_argument("env.slots_per_second must be >= 1");
  if (num_channels < 1) throw std::invalid_argument("env.num_channels must be >= 1");
  if (bandwidth_hz.size() != static_cast<std::size_t>(num_channels)) {
    throw std::invalid_argument("env.bandwidth_hz must list one bandwidth per channel");
  }
  for (double w : bandwidth_hz) {
    if (!(w > 0.0)) throw std::invalid_argument("env.bandwidth_hz entries must be > 0");
  }
  if (!(noise_psd > 0.0)) throw std::invalid_argument("env.noise_psd must be > 0");
  if (!(p_max > 0.0)) throw std::invalid_argument("env.p_max must be > 0");
  if (!(server_hz > 0.0)) throw std::invalid_argument("env.server_hz must be > 0");
  if (!(eta >= 0.0)) throw std::invalid_argument("env.eta must be >= 0");
  if (bits_per_pixel < 1 || eyes_per_frame < 1) {
    throw std::invalid_argument("env.bits_per_pixel and env.eyes_per_frame must be >= 1");
  }
  if (!(compression_range[0] > 0.0) || compression_range[0] > compression_range[1]) {
    throw std::invalid_argument("env.compression_range must satisfy 0 < lo <= hi");
  }
  if (!(cycles_per_bit_range[0] >= 0.0) || cycles_per_bit_range[0] > cycles_per_bit_range[1]) {
    throw std::invalid_argument("env.cycles_per_bit_range must satisfy 0 <= lo <= hi");
  }
  const auto lad = ladder();
  if (rewards.resolution.size() != lad.size()) {
    throw std::invalid_argument("env.rewards.resolution needs one entry per resolution rung");
  }
  if (!(area_side_m > 0.0)) throw std::invalid_argument("env.area_side_m must be > 0");
  fading.validate();
}

void PowerPortions::validate() const {
  double sum = 0.0;
  for (double s : share) {
    if (!(s >= 0.0)) throw std::invalid_argument("power portions must be non-negative");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("power portions must sum to 1");
}

// --- action codec -----------------------------------------------------------

std::uint64_t action_space_size(int num_vus, int num_channels) {
  if (num_vus < 1 || num_channels < 0) throw std::invalid_argument("action_space_size: bad dims");
  const std::uint64_t base = static_cast<std::uint64_t>(num_channels) + 1;
  std::uint64_t size = 1;
  for (int n = 0; n < num_vus; ++n) {
    if (size > (std::numeric_limits<std::uint64_t>::max() >> 1) / base) {
      throw std::overflow_error("action space does not fit in 63 bits");
    }
    size *= base;
  }
  return size;
}

std::uint64_t encode_action(const ChannelAction& action, int num_channels) {
  const std::uint64_t base = static_cast<std::uint64_t>(num_channels) + 1;
  std::uint64_t index = 0;
  for (auto it = action.z.rbegin(); it != action.z.rend(); ++it) {
    if (*it < 0 || *it > num_channels) throw std::invalid_argument("encode_action: z out of range");
    index = index * base + static_cast<std::uint64_t>(*it);
  }
  return index;
}

ChannelAction decode_action(std::uint64_t index, int num_vus, int num_channels) {
  if (index >= action_space_size(num_vus, num_channels)) {
    throw std::out_of_range("decode_action: index out of range");
  }
  const std::uint64_t base = static_cast<std::uint64_t>(num_channels) + 1;
  ChannelAction action;
  action.z.resize(static_cast<std::size_t>(num_vus));
  for (auto& digit : action.z) {
    digit = static_cast<int>(index % base);
    index /= base;
  }
  return action;
}

// --- physical layer ---------------------------------------------------------

std::vector<double> portions_to_power(const PowerPortions& portions, const ChannelAction& action,
                                      double p_max) {
  if (portions.share.size() != action.z.size()) {
    throw std::invalid_argument("portions_to_power: size mismatch");
  }
  std::vector<double> p(action.z.size(), 0.0);
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (action.z[n] != 0) p[n] = portions.share[n] * p_max;
  }
  // Shares that sum to 1 + ulp can put the total a hair above p_max. Trim the
  // largest transmit power until the left-to-right sum fits exactly.
  for (;;) {
    double total = 0.0;
    for (double x : p) total += x;
    if (total <= p_max) break;
    auto it = std::max_element(p.begin(), p.end());
    *it = std::nextafter(*it, 0.0);
  }
  return p;
}

std::vector<std::size_t> sic_order(int channel, const ChannelAction& action,
                                   const channel::ChannelGains& gains, double noise_psd) {
  std::vector<std::size_t> members;
  for (std::size_t n = 0; n < action.z.size(); ++n) {
    if (action.z[n] == channel) members.push_back(n);
  }
  const auto m = static_cast<std::size_t>(channel - 1);
  std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    const double ra = gains.power(a, m) / noise_psd;
    const double rb = gains.power(b, m) / noise_psd;
    if (ra != rb) return ra > rb;
    return a > b;
  });
  return members;
}

std::vector<double> achievable_rates(const ChannelAction& action, std::span<const double> power,
                                     const channel::ChannelGains& gains, const EnvConfig& config) {
  std::vector<double> rate(action.z.size(), 0.0);
  for (int ch = 1; ch <= config.num_channels; ++ch) {
    const auto m = static_cast<std::size_t>(ch - 1);
    const double w = config.bandwidth_hz[m];
    const auto order = sic_order(ch, action, gains, config.noise_psd);
    double earlier_power = 0.0;
    for (std::size_t n : order) {
      const double g = gains.power(n, m);
      const double sinr = power[n] * g / (earlier_power * g + w * config.noise_psd);
      rate[n] = w * std::log2(1.0 + sinr);
      earlier_power += power[n];
    }
  }
  return rate;
}

double server_delay(double frame_bits, double cycles_per_bit, double server_hz, double rate) {
  const double exec = frame_bits * cycles_per_bit / server_hz;
  if (frame_bits == 0.0) return exec;
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return exec + frame_bits / rate;
}

double local_energy(double frame_bits, double cycles_per_bit, const VuProfile& profile, double eta,
                    int z) {
  if (z != 0) return 0.0;
  return profile.mu * frame_bits * cycles_per_bit * eta * profile.cpu_hz * profile.cpu_hz;
}

std::string to_string(LocalBudget b) { return b == LocalBudget::kPerCycle ? "per_cycle" : "literal"; }

LocalBudget parse_local_budget(const std::string& s) {
  if (s == "per_cycle") return LocalBudget::kPerCycle;
  if (s == "literal") return LocalBudget::kLiteral;
  throw std::invalid_argument("unknown local budget '" + s + "' (expected per_cycle|literal)");
}

double local_capacity(const VuProfile& profile, double cycles_per_bit, const EnvConfig& config) {
  const double cycles = profile.cpu_hz * config.slot_duration();
  if (config.local_budget == LocalBudget::kLiteral) return cycles;
  if (!(cycles_per_bit > 0.0)) return std::numeric_limits<double>::infinity();
  return cycles / cycles_per_bit;
}

LocalFrame local_resolution(double capacity_bits, double com, const ResolutionLadder& ladder) {
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    if (ladder.bits(j) / com <= capacity_bits) return {ladder.bits(j), j};
  }
  return {0.0, ladder.size()};
}

int success_flag(int z, double delay, double slot_duration, double resolution, double lowest_bits) {
  if (z != 0 && delay > slot_duration) return 0;
  if (z == 0 && resolution < lowest_bits) return 0;
  return 1;
}

// --- observations -----------------------------------------------------------

std::size_t agent1_state_dim(std::size_t num_vus, std::size_t num_channels) {
  return num_vus * (3 + num_channels) + 1;
}

std::size_t agent2_state_dim(std::size_t num_vus, std::size_t num_channels) {
  return num_vus + agent1_state_dim(num_vus, num_channels);
}

std::vector<double> build_state_agent1(const EnvState& state, std::span<const VuProfile> profiles,
                                       const EnvConfig& config) {
  const std::size_t n_vus = profiles.size();
  const auto n_ch = static_cast<std::size_t>(config.num_channels);
  const double T = config.slots_per_second;
  const double g1 = config.ladder().top();
  const double max_frame = g1 / config.compression_range[0];

  // log10 |h|^2 mapped affinely from [weakest mean - 1, strongest mean + 0.6]
  // (the Rician tails) onto roughly [-1, 1].
  const double far = std::max(1.0, config.area_side_m / std::sqrt(2.0));
  const double lo = std::log10(config.fading.beta0) - config.fading.alpha * std::log10(far) - 1.0;
  const double hi = std::log10(config.fading.beta0) + 0.6;

  std::vector<double> s;
  s.reserve(agent1_state_dim(n_vus, n_ch));
  for (std::size_t n = 0; n < n_vus; ++n) {
    const double frame = frame_size(g1, state.draw.com[n]);
    s.push_back(frame / max_frame);
    const double tolerable = (T - profiles[n].tau_f) - state.fail_count[n];
    s.push_back(tolerable / T);
    for (std::size_t m = 0; m < n_ch; ++m) {
      const double g = std::max(state.draw.gains.power(n, m), 1e-300);
      s.push_back(2.0 * (std::log10(g) - lo) / (hi - lo) - 1.0);
    }
    s.push_back((profiles[n].tau_f - state.succ_count[n]) / T);
  }
  s.push_back((T - state.t) / T);
  return s;
}

std::vector<double> build_state_agent2(std::span<const double> s1, const ChannelAction& action,
                                       int num_channels) {
  std::vector<double> s;
  s.reserve(action.z.size() + s1.size());
  for (int z : action.z) s.push_back(static_cast<double>(z) / num_channels);
  s.insert(s.end(), s1.begin(), s1.end());
  return s;
}

// --- dynamics ---------------------------------------------------------------

SlotDraw draw_slot(std::span<const VuProfile> profiles, const EnvConfig& config,
                   rng::RandomStream& fading, rng::RandomStream& frames) {
  std::vector<double> distances;
  distances.reserve(profiles.size());
  for (const auto& p : profiles) distances.push_back(p.distance_m);
  SlotDraw draw;
  draw.gains = channel::draw_slot_gains(distances, static_cast<std::size_t>(config.num_channels),
                                        config.fading, fading);
  auto uniform_or_fixed = [&](const std::array<double, 2>& range) {
    return range[0] < range[1] ? rng::sample_uniform(frames, range[0], range[1]) : range[0];
  };
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    draw.com.push_back(uniform_or_fixed(config.compression_range));
    draw.cyc.push_back(uniform_or_fixed(config.cycles_per_bit_range));
  }
  return draw;
}

std::pair<StepOutcome, EnvState> apply_slot(const EnvState& state, const ChannelAction& action,
                                            const PowerPortions& portions,
                                            std::span<const VuProfile> profiles,
                                            const EnvConfig& config) {
  if (state.done) throw std::logic_error("step called on a finished episode");
  const std::size_t n_vus = profiles.size();
  if (action.z.size() != n_vus || portions.share.size() != n_vus) {
    throw std::invalid_argument("step: action size does not match the number of VUs");
  }
  for (int z : action.z) {
    if (z < 0 || z > config.num_channels) throw std::invalid_argument("step: z out of range");
  }
  portions.validate();

  const auto ladder = config.ladder();
  const double iota = config.slot_duration();
  const int T = config.slots_per_second;
  const double N = static_cast<double>(n_vus);

  StepOutcome out;
  out.power = portions_to_power(portions, action, config.p_max);
  out.rate = achievable_rates(action, out.power, state.draw.gains, config);
  out.success.assign(n_vus, 0);
  out.delay.assign(n_vus, 0.0);
  out.energy.assign(n_vus, 0.0);
  out.resolution.assign(n_vus, 0.0);
  out.rung.assign(n_vus, 0);
  out.r1.assign(n_vus, 0.0);
  out.r2.assign(n_vus, 0.0);

  EnvState next;
  next.t = state.t + 1;
  next.fail_count = state.fail_count;
  next.succ_count = state.succ_count;

  for (std::size_t n = 0; n < n_vus; ++n) {
    const int z = action.z[n];
    const double com = state.draw.com[n];
    const double cyc = state.draw.cyc[n];
    if (z != 0) {
      out.resolution[n] = ladder.top();
      out.rung[n] = 0;
      out.delay[n] = server_delay(frame_size(ladder.top(), com), cyc, config.server_hz, out.rate[n]);
    } else {
      const LocalFrame local = local_resolution(local_capacity(profiles[n], cyc, config), com, ladder);
      out.resolution[n] = local.resolution;
      out.rung[n] = static_cast<int>(local.rung);
      out.energy[n] = local_energy(frame_size(local.resolution, com), cyc, profiles[n], config.eta, 0);
    }
    out.success[n] = success_flag(z, out.delay[n], iota, out.resolution[n], ladder.bottom());
    if (out.success[n] != 0) {
      ++next.succ_count[n];
    } else {
      ++next.fail_count[n];
    }

    const auto rung = static_cast<std::size_t>(out.rung[n]);
    const double r_res = rung < ladder.size() ? config.rewards.resolution[rung] : 0.0;
    const double r_fail = config.rewards.fail * (1 - out.success[n]);
    out.r2[n] = r_res - r_fail;
    out.r1[n] = out.r2[n] - config.rewards.energy * out.energy[n];
  }

  if (config.early_termination) {
    for (std::size_t n = 0; n < n_vus; ++n) {
      if (next.fail_count[n] > T - profiles[n].tau_f) {
        out.terminated = true;
        out.term_vu = n;
        break;
      }
    }
  }

  double shared = 0.0;
  if (out.terminated) shared -= config.rewards.terminate * (T - next.t);
  if (next.t >= T) {
    int worst = std::numeric_limits<int>::max();
    for (std::size_t n = 0; n < n_vus; ++n) worst = std::min(worst, next.succ_count[n] - profiles[n].tau_f);
    shared += config.rewards.worst * worst;
  }
  for (std::size_t n = 0; n < n_vus; ++n) {
    out.r1[n] = (out.r1[n] + shared) / N;
    out.r2[n] = (out.r2[n] + shared) / N;
  }

  out.done = out.terminated || next.t >= T;
  next.done = out.done;
  return {std::move(out), std::move(next)};
}

std::vector<VuProfile> sample_profiles(std::size_t num_vus, const EnvConfig& config,
                                       const ProfileSampling& sampling,
                                       std::span<const VuOverride> overrides,
                                       rng::RandomStream& stream) {
  if (overrides.size() > num_vus) throw std::invalid_argument("more VU overrides than VUs");
  std::vector<VuProfile> profiles(num_vus);
  const double half = config.area_side_m / 2.0;
  for (std::size_t n = 0; n < num_vus; ++n) {
    // Every field is drawn even when overridden so that editing one VU does
    // not shift the random draws of the others.
    const double ghz = rng::sample_uniform(stream, sampling.cpu_ghz[0], sampling.cpu_ghz[1]);
    const auto battery = static_cast<Battery>(rng::sample_int(stream, 0, 2));
    const auto tau = static_cast<int>(rng::sample_int(stream, sampling.tau_f[0], sampling.tau_f[1]));
    const double x = rng::sample_uniform(stream, -half, half);
    const double y = rng::sample_uniform(stream, -half, half);
    const double dist = std::max(1.0, std::hypot(x, y));

    const VuOverride ov = n < overrides.size() ? overrides[n] : VuOverride{};
    auto& p = profiles[n];
    p.cpu_hz = ov.cpu_ghz.value_or(ghz) * 1e9;
    p.mu = battery_weight(ov.battery.value_or(battery));
    p.tau_f = ov.tau_f.value_or(tau);
    p.distance_m = ov.distance_m.value_or(dist);
    p.validate(config.slots_per_second);
  }
  return profiles;
}

VrEnv::VrEnv(EnvConfig config, std::vector<VuProfile> profiles, rng::RandomStream stream)
    : config_(std::move(config)),
      profiles_(std::move(profiles)),
      fading_(stream.substream("fading")),
      frames_(stream.substream("frames")) {
  config_.validate();
  if (profiles_.empty()) throw std::invalid_argument("VrEnv needs at least one VU");
  for (const auto& p : profiles_) p.validate(config_.slots_per_second);
}

const EnvState& VrEnv::reset() {
  state_ = EnvState{};
  state_.fail_count.assign(profiles_.size(), 0);
  state_.succ_count.assign(profiles_.size(), 0);
  state_.draw = draw_slot(profiles_, config_, fading_, frames_);
  return state_;
}

StepOutcome VrEnv::step(const ChannelAction& action, const PowerPortions& portions) {
  auto [outcome, next] = apply_slot(state_, action, portions, profiles_, config_);
  state_ = std::move(next);
  if (!state_.done) state_.draw = draw_slot(profiles_, config_, fading_, frames_);
  return outcome;
}

std::vector<double> VrEnv::observe_agent1() const {
  return build_state_agent1(state_, profiles_, config_);
}

}  // namespace ucha::env
