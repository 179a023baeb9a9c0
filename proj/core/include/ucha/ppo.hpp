#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ucha/neural.hpp"
#include "ucha/rng.hpp"

namespace ucha::ppo {

using nn::Matrix;
using nn::Vector;

enum class ValueTargetMode { kStandard, kDiscounted };

std::string to_string(ValueTargetMode mode);
ValueTargetMode parse_value_target_mode(const std::string& s);

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 10;
  int minibatch = 256;
  int segment = 2048;
  int target_sync = 4;  ///< epochs between target-critic syncs
  ValueTargetMode value_target = ValueTargetMode::kStandard;
  double entropy_discrete = 0.01;
  double entropy_continuous = 0.0;
  bool normalize_advantages = true;
  nn::AdamConfig actor_adam{};
  nn::AdamConfig critic_adam{};

  void validate() const;
};

/// Discrete channel-assignment policy over (M+1)^N joint codes.
struct CategoricalActor {
  nn::Mlp net;
  nn::Adam opt;
};

/// Diagonal Gaussian over pre-softmax power logits with a state-independent
/// log standard deviation, kept inside [kLogStdMin, kLogStdMax].
struct GaussianActor {
  nn::Mlp net;
  Vector log_std;
  nn::Adam opt;
};

/// Value network with one output per head and a frozen target copy.
struct CriticHeads {
  nn::Mlp net;
  nn::Mlp target;
  nn::Adam opt;

  [[nodiscard]] std::size_t heads() const { return net.output_dim(); }
  void sync_target() { target = net; }
};

CategoricalActor make_categorical_actor(std::size_t state_dim, std::size_t num_actions,
                                        const std::vector<std::size_t>& hidden,
                                        const nn::AdamConfig& adam, rng::RandomStream& stream);
GaussianActor make_gaussian_actor(std::size_t state_dim, std::size_t action_dim,
                                  const std::vector<std::size_t>& hidden, const nn::AdamConfig& adam,
                                  rng::RandomStream& stream, double initial_log_std = 0.0);
CriticHeads make_critic(std::size_t state_dim, std::size_t heads, const std::vector<std::size_t>& hidden,
                        const nn::AdamConfig& adam, rng::RandomStream& stream);

/// One on-policy trajectory segment. Column t of a state matrix is step t.
struct RolloutBuffer {
  std::size_t capacity = 0;
  std::size_t size = 0;
  std::size_t num_vus = 0;
  std::int64_t policy_version = -1;  ///< actor snapshot that produced the data

  Matrix s1;        // d1 x capacity
  Matrix s2;        // d2 x capacity
  Matrix a2_raw;    // N x capacity
  std::vector<std::uint64_t> a1;
  Vector logp1;
  Vector logp2;
  Matrix r1;        // capacity x N
  Matrix r2;        // capacity x N
  std::vector<std::uint8_t> done;  // episode ended after step t

  Vector next_s1;   // state after the final step (bootstrap input)
  Vector next_s2;   // {greedy a1; next_s1}, used by a critic on s2
  bool next_terminal = true;

  RolloutBuffer() = default;
  RolloutBuffer(std::size_t capacity, std::size_t d1, std::size_t d2, std::size_t num_vus);

  void clear();
  [[nodiscard]] bool full() const { return size == capacity; }
  void push(const Vector& state1, const Vector& state2, std::uint64_t action1, const Vector& action2_raw,
            double log_prob1, double log_prob2, std::span<const double> reward1,
            std::span<const double> reward2, bool episode_done);
};

/// Truncated GAE per head. rewards: T x H; values: (T+1) x H where row T is
/// the bootstrap value V(s^{T+1}); done[t] masks the bootstrap after step t.
Matrix compute_gae(const Matrix& rewards, const Matrix& values, std::span<const std::uint8_t> done,
                   double gamma, double lambda);

/// A + V (standard) or A + gamma * V (discounted), per head.
Matrix value_targets(const Matrix& advantages, const Matrix& values, double gamma, ValueTargetMode mode);

/// Shuffled partition of [0, n) into batches of `batch` (last one may be short).
std::vector<std::vector<std::size_t>> minibatch_iterate(std::size_t n, std::size_t batch,
                                                        rng::RandomStream& stream);

/// Mean/std normalization (population std, epsilon 1e-8). A single element
/// is centred only.
Vector normalize(const Vector& v);

struct PolicyLoss {
  double loss = 0.0;        ///< -mean clipped surrogate - entropy bonus
  double surrogate = 0.0;   ///< mean clipped surrogate
  double entropy = 0.0;     ///< mean entropy
  double clip_fraction = 0.0;
};

/// dLoss/dlogp for the clipped surrogate; zero where the clipped branch is
/// the minimum.
Vector surrogate_logp_grad(const Vector& new_logp, const Vector& old_logp, const Vector& advantages,
                           double clip, PolicyLoss* loss);

/// Clipped surrogate for the categorical actor on a minibatch. Gradients are
/// written to `grads`.
PolicyLoss categorical_actor_loss(const nn::Mlp& net, const Matrix& states,
                                  std::span<const std::uint64_t> actions, const Vector& old_logp,
                                  const Vector& advantages, double clip, double entropy_coef,
                                  nn::MlpGradients* grads);

/// Clipped surrogate for the Gaussian actor; also returns the log_std gradient.
PolicyLoss gaussian_actor_loss(const nn::Mlp& net, const Vector& log_std, const Matrix& states,
                               const Matrix& raw_actions, const Vector& old_logp, const Vector& advantages,
                               double clip, double entropy_coef, nn::MlpGradients* grads,
                               Vector* log_std_grad);

struct CriticLoss {
  double loss = 0.0;        ///< batch mean of sum over heads
  Vector per_head;          ///< batch mean squared error for each head
};

/// Sum over heads of squared errors, averaged over the batch. targets: H x B.
CriticLoss critic_loss(const nn::Mlp& net, const Matrix& states, const Matrix& targets,
                       nn::MlpGradients* grads);

/// Optimizer steps (with the log_std projection for the Gaussian actor).
void apply_gradients(CategoricalActor& actor, nn::MlpGradients& grads);
void apply_gradients(GaussianActor& actor, nn::MlpGradients& grads, Vector& log_std_grad);
void apply_gradients(CriticHeads& critic, nn::MlpGradients& grads);

/// Gathers columns of `m` for the given indices.
Matrix gather_cols(const Matrix& m, std::span<const std::size_t> idx);
/// Gathers rows of `m` for the given indices.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx);
Vector gather(const Vector& v, std::span<const std::size_t> idx);

}  // namespace ucha::ppo
