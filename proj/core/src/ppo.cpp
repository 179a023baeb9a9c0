#include "ucha/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ucha::ppo {

std::string to_string(ValueTargetMode mode) {
  return mode == ValueTargetMode::kStandard ? "standard" : "discounted";
}

ValueTargetMode parse_value_target_mode(const std::string& s) {
  if (s == "standard") return ValueTargetMode::kStandard;
  if (s == "discounted") return ValueTargetMode::kDiscounted;
  throw std::invalid_argument("unknown value_target mode '" + s + "' (expected standard|discounted)");
}

void PpoHyper::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("ppo.lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo.clip must be > 0");
  if (epochs < 1) throw std::invalid_argument("ppo.epochs must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("ppo.minibatch must be >= 1");
  if (segment < 1) throw std::invalid_argument("ppo.segment must be >= 1");
  if (target_sync < 1) throw std::invalid_argument("ppo.target_sync must be >= 1");
  if (!(entropy_discrete >= 0.0) || !(entropy_continuous >= 0.0)) {
    throw std::invalid_argument("ppo entropy coefficients must be >= 0");
  }
  for (const auto* a : {&actor_adam, &critic_adam}) {
    if (!(a->lr > 0.0)) throw std::invalid_argument("ppo adam lr must be > 0");
    if (!(a->beta1 >= 0.0 && a->beta1 < 1.0) || !(a->beta2 >= 0.0 && a->beta2 < 1.0)) {
      throw std::invalid_argument("ppo adam betas must be in [0, 1)");
    }
    if (!(a->eps > 0.0)) throw std::invalid_argument("ppo adam eps must be > 0");
  }
}

namespace {

std::vector<std::size_t> layer_dims(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

CategoricalActor make_categorical_actor(std::size_t state_dim, std::size_t num_actions,
                                        const std::vector<std::size_t>& hidden,
                                        const nn::AdamConfig& adam, rng::RandomStream& stream) {
  return {nn::Mlp::orthogonal(layer_dims(state_dim, hidden, num_actions), 0.01, stream), nn::Adam(adam)};
}

GaussianActor make_gaussian_actor(std::size_t state_dim, std::size_t action_dim,
                                  const std::vector<std::size_t>& hidden, const nn::AdamConfig& adam,
                                  rng::RandomStream& stream, double initial_log_std) {
  GaussianActor actor;
  actor.net = nn::Mlp::orthogonal(layer_dims(state_dim, hidden, action_dim), 0.01, stream);
  actor.log_std = Vector::Constant(static_cast<Eigen::Index>(action_dim),
                                   std::clamp(initial_log_std, nn::kLogStdMin, nn::kLogStdMax));
  actor.opt = nn::Adam(adam);
  return actor;
}

CriticHeads make_critic(std::size_t state_dim, std::size_t heads, const std::vector<std::size_t>& hidden,
                        const nn::AdamConfig& adam, rng::RandomStream& stream) {
  CriticHeads critic;
  critic.net = nn::Mlp::orthogonal(layer_dims(state_dim, hidden, heads), 1.0, stream);
  critic.target = critic.net;
  critic.opt = nn::Adam(adam);
  return critic;
}

RolloutBuffer::RolloutBuffer(std::size_t cap, std::size_t d1, std::size_t d2, std::size_t n)
    : capacity(cap), num_vus(n) {
  const auto c = static_cast<Eigen::Index>(cap);
  s1.resize(static_cast<Eigen::Index>(d1), c);
  s2.resize(static_cast<Eigen::Index>(d2), c);
  a2_raw.resize(static_cast<Eigen::Index>(n), c);
  a1.resize(cap);
  logp1.resize(c);
  logp2.resize(c);
  r1.resize(c, static_cast<Eigen::Index>(n));
  r2.resize(c, static_cast<Eigen::Index>(n));
  done.resize(cap);
}

void RolloutBuffer::clear() {
  size = 0;
  policy_version = -1;
  next_terminal = true;
}

void RolloutBuffer::push(const Vector& state1, const Vector& state2, std::uint64_t action1,
                         const Vector& action2_raw, double log_prob1, double log_prob2,
                         std::span<const double> reward1, std::span<const double> reward2, bool episode_done) {
  if (full()) throw std::logic_error("RolloutBuffer::push on a full buffer");
  if (reward1.size() != num_vus || reward2.size() != num_vus) {
    throw std::invalid_argument("RolloutBuffer::push: reward vectors must have one entry per VU");
  }
  if (!std::isfinite(log_prob1) || !std::isfinite(log_prob2)) {
    throw std::invalid_argument("RolloutBuffer::push: non-finite log-probability");
  }
  const auto t = static_cast<Eigen::Index>(size);
  s1.col(t) = state1;
  s2.col(t) = state2;
  a2_raw.col(t) = action2_raw;
  a1[size] = action1;
  logp1(t) = log_prob1;
  logp2(t) = log_prob2;
  for (std::size_t n = 0; n < num_vus; ++n) {
    r1(t, static_cast<Eigen::Index>(n)) = reward1[n];
    r2(t, static_cast<Eigen::Index>(n)) = reward2[n];
  }
  done[size] = episode_done ? 1 : 0;
  ++size;
}

Matrix compute_gae(const Matrix& rewards, const Matrix& values, std::span<const std::uint8_t> done,
                   double gamma, double lambda) {
  const Eigen::Index steps = rewards.rows();
  if (values.rows() != steps + 1 || values.cols() != rewards.cols() ||
      done.size() != static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("compute_gae: shape mismatch");
  }
  Matrix adv(steps, rewards.cols());
  for (Eigen::Index h = 0; h < rewards.cols(); ++h) {
    double running = 0.0;
    for (Eigen::Index t = steps; t-- > 0;) {
      const double live = done[static_cast<std::size_t>(t)] != 0 ? 0.0 : 1.0;
      const double delta = rewards(t, h) + gamma * live * values(t + 1, h) - values(t, h);
      running = delta + gamma * lambda * live * running;
      adv(t, h) = running;
    }
  }
  return adv;
}

Matrix value_targets(const Matrix& advantages, const Matrix& values, double gamma, ValueTargetMode mode) {
  const Matrix v = values.topRows(advantages.rows());
  return mode == ValueTargetMode::kStandard ? Matrix(advantages + v) : Matrix(advantages + gamma * v);
}

std::vector<std::vector<std::size_t>> minibatch_iterate(std::size_t n, std::size_t batch,
                                                        rng::RandomStream& stream) {
  if (batch == 0) throw std::invalid_argument("minibatch_iterate: batch must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with the project sampler (std::shuffle is implementation-defined).
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng::sample_int(stream, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Vector normalize(const Vector& v) {
  if (v.size() == 0) return v;
  const double mean = v.mean();
  Vector c = v.array() - mean;
  if (v.size() == 1) return c;
  const double std = std::sqrt(c.squaredNorm() / static_cast<double>(v.size()));
  return c / (std + 1e-8);
}

Vector surrogate_logp_grad(const Vector& new_logp, const Vector& old_logp, const Vector& advantages,
                           double clip, PolicyLoss* loss) {
  const Eigen::Index b = new_logp.size();
  const double inv_b = 1.0 / static_cast<double>(b);
  Vector grad(b);
  double surr = 0.0;
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double ratio = std::exp(new_logp(i) - old_logp(i));
    const double a = advantages(i);
    const double unclipped = ratio * a;
    const double bounded = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * a;
    surr += std::min(unclipped, bounded);
    grad(i) = unclipped <= bounded ? -inv_b * unclipped : 0.0;
    if (std::abs(ratio - 1.0) > clip) clipped += 1.0;
  }
  if (loss != nullptr) {
    loss->surrogate = surr * inv_b;
    loss->loss = -loss->surrogate;
    loss->clip_fraction = clipped * inv_b;
  }
  return grad;
}

PolicyLoss categorical_actor_loss(const nn::Mlp& net, const Matrix& states,
                                  std::span<const std::uint64_t> actions, const Vector& old_logp,
                                  const Vector& advantages, double clip, double entropy_coef,
                                  nn::MlpGradients* grads) {
  const Eigen::Index batch = states.cols();
  if (static_cast<std::size_t>(batch) != actions.size() || old_logp.size() != batch ||
      advantages.size() != batch) {
    throw std::invalid_argument("categorical_actor_loss: batch size mismatch");
  }
  nn::ForwardCache cache;
  Matrix logits = net.forward(states, &cache);
  const Eigen::Index num_actions = logits.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  Vector new_logp(batch);
  Vector entropy(batch);
  Vector lse(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    lse(b) = nn::log_sum_exp(logits.col(b));
    const auto a = static_cast<Eigen::Index>(actions[static_cast<std::size_t>(b)]);
    if (a >= num_actions) throw std::out_of_range("categorical_actor_loss: action index out of range");
    new_logp(b) = logits(a, b) - lse(b);
  }

  PolicyLoss loss;
  const Vector g = surrogate_logp_grad(new_logp, old_logp, advantages, clip, &loss);

  // Reuse the logits storage for the output gradient column by column.
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto col = logits.col(b);
    col.array() -= lse(b);                 // log p
    const Eigen::ArrayXd p = col.array().exp();
    const double h = -(p * col.array()).sum();
    entropy(b) = h;
    // d(-c*H/B)/dlogit_i = c/B * p_i (log p_i + H)
    Eigen::ArrayXd d = (entropy_coef * inv_b) * p * (col.array() + h);
    d -= g(b) * p;
    d(static_cast<Eigen::Index>(actions[static_cast<std::size_t>(b)])) += g(b);
    col = d.matrix();
  }
  loss.entropy = entropy.mean();
  loss.loss = -loss.surrogate - entropy_coef * loss.entropy;
  if (grads != nullptr) *grads = net.backward(cache, logits);
  return loss;
}

PolicyLoss gaussian_actor_loss(const nn::Mlp& net, const Vector& log_std, const Matrix& states,
                               const Matrix& raw_actions, const Vector& old_logp, const Vector& advantages,
                               double clip, double entropy_coef, nn::MlpGradients* grads,
                               Vector* log_std_grad) {
  const Eigen::Index batch = states.cols();
  if (raw_actions.cols() != batch || old_logp.size() != batch || advantages.size() != batch) {
    throw std::invalid_argument("gaussian_actor_loss: batch size mismatch");
  }
  nn::ForwardCache cache;
  const Matrix mean = net.forward(states, &cache);
  if (mean.rows() != log_std.size() || raw_actions.rows() != log_std.size()) {
    throw std::invalid_argument("gaussian_actor_loss: action dimension mismatch");
  }
  const Vector inv_var = (-2.0 * log_std.array()).exp().matrix();
  Vector new_logp(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    new_logp(b) = nn::gaussian_log_prob(mean.col(b), log_std, raw_actions.col(b));
  }

  PolicyLoss loss;
  const Vector g = surrogate_logp_grad(new_logp, old_logp, advantages, clip, &loss);
  const double entropy =
      (log_std.array() + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)).sum();
  loss.entropy = entropy;
  loss.loss = -loss.surrogate - entropy_coef * entropy;

  const Matrix diff = raw_actions - mean;
  Matrix dmean(mean.rows(), batch);
  Vector dlog = Vector::Constant(log_std.size(), -entropy_coef);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Vector scaled = diff.col(b).cwiseProduct(inv_var);
    dmean.col(b) = g(b) * scaled;
    dlog.array() += g(b) * (diff.col(b).array() * scaled.array() - 1.0);
  }
  if (grads != nullptr) *grads = net.backward(cache, dmean);
  if (log_std_grad != nullptr) *log_std_grad = dlog;
  return loss;
}

CriticLoss critic_loss(const nn::Mlp& net, const Matrix& states, const Matrix& targets,
                       nn::MlpGradients* grads) {
  nn::ForwardCache cache;
  const Matrix v = net.forward(states, &cache);
  if (v.rows() != targets.rows() || v.cols() != targets.cols()) {
    throw std::invalid_argument("critic_loss: target shape mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(states.cols());
  const Matrix diff = v - targets;
  CriticLoss out;
  out.per_head = diff.rowwise().squaredNorm() * inv_b;
  out.loss = out.per_head.sum();
  if (grads != nullptr) *grads = net.backward(cache, (2.0 * inv_b) * diff);
  return out;
}

void apply_gradients(CategoricalActor& actor, nn::MlpGradients& grads) {
  const auto params = actor.net.blocks();
  const auto g = grads.blocks();
  actor.opt.step(params, g);
}

void apply_gradients(GaussianActor& actor, nn::MlpGradients& grads, Vector& log_std_grad) {
  auto params = actor.net.blocks();
  auto g = grads.blocks();
  params.push_back({actor.log_std.data(), static_cast<std::size_t>(actor.log_std.size())});
  g.push_back({log_std_grad.data(), static_cast<std::size_t>(log_std_grad.size())});
  actor.opt.step(params, g);
  actor.log_std = actor.log_std.cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
}

void apply_gradients(CriticHeads& critic, nn::MlpGradients& grads) {
  const auto params = critic.net.blocks();
  const auto g = grads.blocks();
  critic.opt.step(params, g);
}

Matrix gather_cols(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(static_cast<Eigen::Index>(idx[j]));
  return out;
}

Vector gather(const Vector& v, std::span<const std::size_t> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace ucha::ppo
