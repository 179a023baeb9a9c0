#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ucha/ppo.hpp"
#include "ucha/rng.hpp"
#include "ucha/vr_env.hpp"

namespace ucha::train {

using nn::Matrix;
using nn::Vector;

enum class AlgorithmKind { kUcha, kHappo, kIppo, kRandom };

std::string to_string(AlgorithmKind kind);
AlgorithmKind parse_algorithm(const std::string& name);

struct NetworkConfig {
  std::vector<std::size_t> hidden{128, 128};
  double initial_log_std = 0.0;
};

/// Actor and critic parameters for one learner.
///
/// UCHA: critic1 has N heads on s1. HAPPO: critic1 has one head on s1 and
/// learns the VU-summed reward. IPPO: critic1 (N heads, s1, Agent1 rewards)
/// and critic2 (N heads, s2, Agent2 rewards). RANDOM never updates them.
struct AgentNets {
  AlgorithmKind kind = AlgorithmKind::kUcha;
  std::size_t num_vus = 0;
  int num_channels = 0;
  ppo::CategoricalActor actor1;
  ppo::GaussianActor actor2;
  ppo::CriticHeads critic1;
  std::optional<ppo::CriticHeads> critic2;
  std::int64_t policy_version = 0;
  std::int64_t epochs_done = 0;
  std::int64_t target_syncs = 0;
};

AgentNets make_nets(AlgorithmKind kind, std::size_t num_vus, int num_channels, const NetworkConfig& net,
                    const ppo::PpoHyper& hyper, const rng::RandomStream& init);

enum class ActionMode { kSample, kGreedy };

struct JointAction {
  std::uint64_t index = 0;
  env::ChannelAction z;
  Vector s2;
  Vector raw;  ///< pre-softmax power logits
  env::PowerPortions portions;
  double logp1 = 0.0;
  double logp2 = 0.0;
};

/// s1 -> a1 ~ pi1(.|s1) -> s2 = {a1; s1} -> a2 ~ pi2(.|s2) -> softmax.
JointAction select_action(const AgentNets& nets, const Vector& s1, ActionMode mode, rng::RandomStream& stream);

/// Uniform joint code and a uniform draw from the simplex.
JointAction random_action(std::size_t num_vus, int num_channels, rng::RandomStream& stream);

struct UpdateStats {
  Vector critic_loss;        ///< critic1 per-head loss, mean over minibatches
  Vector critic2_loss;       ///< IPPO agent-2 critic, empty otherwise
  double actor1_loss = 0.0;
  double actor2_loss = 0.0;
  std::int64_t minibatch_steps = 0;
  std::int64_t target_syncs = 0;
};

/// Restricts an update to one agent (scripted isolation checks).
struct UpdateMask {
  bool agent1 = true;
  bool agent2 = true;
};

UpdateStats update_ucha(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                        rng::RandomStream& stream);
UpdateStats update_happo(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                         rng::RandomStream& stream);
UpdateStats update_ippo(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                        rng::RandomStream& stream, UpdateMask mask = {});
/// Dispatches on nets.kind. Throws std::logic_error if the buffer was not
/// produced by the current policy version.
UpdateStats update(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                   rng::RandomStream& stream);

/// Per-step record of one evaluation episode.
struct EpisodeLog {
  std::vector<std::vector<int>> success;    // [t][n]
  std::vector<std::vector<double>> energy;  // [t][n]
  std::vector<std::vector<int>> rung;       // [t][n]
  std::vector<std::vector<double>> r1;      // [t][n]
};

struct EvalReport {
  int episodes = 0;
  int episode_length = 0;                   ///< length of the last episode
  double mean_reward = 0.0;                 ///< mean over episodes of sum_t sum_n r1
  double reward_std = 0.0;                  ///< population std over episodes
  double worst_vu = 0.0;                    ///< mean of min_n(successes - tau)
  double sum_energy = 0.0;                  ///< mean joules per episode, all VUs
  std::vector<double> episode_rewards;
  std::vector<double> episode_worst;
  std::vector<double> fps;                  ///< mean successes per VU per episode
  std::vector<double> energy_per_vu;        ///< mean joules per VU per episode
  std::vector<double> local_per_vu;         ///< mean local generations per VU
  std::vector<std::vector<double>> rung_counts;  ///< [n][rung] of received frames; failed frames on the last rung
  std::vector<EpisodeLog> logs;             ///< filled when requested
};

/// Full-length episodes with early termination disabled. `nets` may be null
/// only for RANDOM.
EvalReport evaluate(const env::EnvConfig& config, const std::vector<env::VuProfile>& profiles,
                    AlgorithmKind kind, const AgentNets* nets, int episodes, const rng::RandomStream& stream,
                    ActionMode mode = ActionMode::kSample, bool keep_logs = false);

struct TrainerSetup {
  env::EnvConfig env;
  std::vector<env::VuProfile> profiles;
  ppo::PpoHyper hyper;
  NetworkConfig network;
  AlgorithmKind kind = AlgorithmKind::kUcha;
  std::uint64_t seed = 0;
};

struct TimingStats {
  double exec_ms = 0.0;      ///< env steps with policy inference
  std::int64_t exec_steps = 0;
  double train_ms = 0.0;     ///< optimization minibatch steps
  std::int64_t train_steps = 0;
};

struct EvalEvent {
  std::int64_t step = 0;
  EvalReport report;
  Vector critic_loss;        ///< mean per-head critic loss since the last event; NaN before the first update
  double train_reward = 0.0; ///< mean training-episode return since the last event; NaN if none finished
};

/// One (algorithm, scenario, seed) learner.
class Trainer {
 public:
  explicit Trainer(TrainerSetup setup);

  /// Steps the training environment until the buffer is full or
  /// `max_steps` more steps were taken. Returns the steps taken. Calls
  /// `on_step` with the global step after each one.
  std::int64_t collect(ppo::RolloutBuffer& buffer, std::int64_t max_steps,
                       const std::function<void(std::int64_t)>& on_step = {});

  /// Runs `total_steps` environment steps with updates every segment and an
  /// evaluation every `eval_interval` steps.
  void train(std::int64_t total_steps, std::int64_t eval_interval, int eval_episodes, ActionMode eval_mode,
             const std::function<void(const EvalEvent&)>& on_eval);

  EvalReport evaluate_now(int episodes, ActionMode mode, bool keep_logs = false) const;

  [[nodiscard]] const AgentNets& nets() const { return nets_; }
  AgentNets& nets() { return nets_; }
  [[nodiscard]] const TrainerSetup& setup() const { return setup_; }
  [[nodiscard]] std::int64_t global_step() const { return step_; }
  [[nodiscard]] const TimingStats& timing() const { return timing_; }
  [[nodiscard]] const std::vector<UpdateStats>& update_history() const { return history_; }

 private:
  TrainerSetup setup_;
  AgentNets nets_;
  env::VrEnv env_;
  rng::RandomStream policy_stream_;
  rng::RandomStream minibatch_stream_;
  rng::RandomStream eval_stream_;
  std::int64_t step_ = 0;
  double episode_return_ = 0.0;
  std::vector<double> finished_returns_;
  TimingStats timing_;
  std::vector<UpdateStats> history_;
};

}  // namespace ucha::train
