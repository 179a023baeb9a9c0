#include "ucha/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ucha::train {

std::string to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kUcha: return "ucha";
    case AlgorithmKind::kHappo: return "happo";
    case AlgorithmKind::kIppo: return "ippo";
    case AlgorithmKind::kRandom: return "random";
  }
  return "unknown";
}

AlgorithmKind parse_algorithm(const std::string& name) {
  if (name == "ucha") return AlgorithmKind::kUcha;
  if (name == "happo") return AlgorithmKind::kHappo;
  if (name == "ippo") return AlgorithmKind::kIppo;
  if (name == "random") return AlgorithmKind::kRandom;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected ucha|happo|ippo|random)");
}

AgentNets make_nets(AlgorithmKind kind, std::size_t num_vus, int num_channels, const NetworkConfig& net,
                    const ppo::PpoHyper& hyper, const rng::RandomStream& init) {
  const auto m = static_cast<std::size_t>(num_channels);
  const std::size_t d1 = env::agent1_state_dim(num_vus, m);
  const std::size_t d2 = env::agent2_state_dim(num_vus, m);
  const auto actions = static_cast<std::size_t>(env::action_space_size(static_cast<int>(num_vus), num_channels));

  AgentNets nets;
  nets.kind = kind;
  nets.num_vus = num_vus;
  nets.num_channels = num_channels;
  auto s_actor1 = init.substream("actor1");
  auto s_actor2 = init.substream("actor2");
  auto s_critic1 = init.substream("critic1");
  nets.actor1 = ppo::make_categorical_actor(d1, actions, net.hidden, hyper.actor_adam, s_actor1);
  nets.actor2 = ppo::make_gaussian_actor(d2, num_vus, net.hidden, hyper.actor_adam, s_actor2, net.initial_log_std);
  const std::size_t heads = kind == AlgorithmKind::kHappo ? 1 : num_vus;
  nets.critic1 = ppo::make_critic(d1, heads, net.hidden, hyper.critic_adam, s_critic1);
  if (kind == AlgorithmKind::kIppo) {
    auto s_critic2 = init.substream("critic2");
    nets.critic2 = ppo::make_critic(d2, num_vus, net.hidden, hyper.critic_adam, s_critic2);
  }
  return nets;
}

JointAction select_action(const AgentNets& nets, const Vector& s1, ActionMode mode, rng::RandomStream& stream) {
  JointAction act;
  const Vector logits = nets.actor1.net.forward(s1);
  if (mode == ActionMode::kSample) {
    const auto c = nn::categorical_sample_logprob(logits, stream);
    act.index = c.index;
    act.logp1 = c.log_prob;
  } else {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    act.index = static_cast<std::uint64_t>(best);
    act.logp1 = logits(best) - nn::log_sum_exp(logits);
  }
  act.z = env::decode_action(act.index, static_cast<int>(nets.num_vus), nets.num_channels);
  const auto s2 = env::build_state_agent2(std::span<const double>(s1.data(), static_cast<std::size_t>(s1.size())),
                                          act.z, nets.num_channels);
  act.s2 = Eigen::Map<const Vector>(s2.data(), static_cast<Eigen::Index>(s2.size()));
  const Vector mean = nets.actor2.net.forward(act.s2);
  if (mode == ActionMode::kSample) {
    auto g = nn::gaussian_sample_logprob(mean, nets.actor2.log_std, stream);
    act.raw = std::move(g.raw);
    act.logp2 = g.log_prob;
  } else {
    act.raw = mean;
    act.logp2 = nn::gaussian_log_prob(mean, nets.actor2.log_std, mean);
  }
  const Vector p = nn::softmax(act.raw);
  act.portions.share.assign(p.data(), p.data() + p.size());
  return act;
}

JointAction random_action(std::size_t num_vus, int num_channels, rng::RandomStream& stream) {
  JointAction act;
  const auto size = env::action_space_size(static_cast<int>(num_vus), num_channels);
  act.index = static_cast<std::uint64_t>(rng::sample_int(stream, 0, static_cast<std::int64_t>(size - 1)));
  act.z = env::decode_action(act.index, static_cast<int>(num_vus), num_channels);
  // Normalized unit exponentials are uniform on the simplex.
  std::vector<double> e(num_vus);
  for (auto& x : e) x = -std::log(1.0 - rng::sample_unit(stream));
  const double total = std::accumulate(e.begin(), e.end(), 0.0);
  act.raw.resize(static_cast<Eigen::Index>(num_vus));
  for (std::size_t n = 0; n < num_vus; ++n) {
    e[n] /= total;
    act.raw(static_cast<Eigen::Index>(n)) = std::log(e[n]);
  }
  act.portions.share = std::move(e);
  return act;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Target-critic values for the buffer states plus the bootstrap row.
Matrix target_values(const nn::Mlp& target, const Matrix& states, std::size_t n, const Vector& next_state,
                     bool next_terminal) {
  Matrix ext(states.rows(), static_cast<Eigen::Index>(n) + 1);
  ext.leftCols(static_cast<Eigen::Index>(n)) = states.leftCols(static_cast<Eigen::Index>(n));
  if (next_terminal || next_state.size() != states.rows()) {
    ext.col(static_cast<Eigen::Index>(n)).setZero();
  } else {
    ext.col(static_cast<Eigen::Index>(n)) = next_state;
  }
  Matrix v = target.forward(ext).transpose();
  if (next_terminal) v.row(static_cast<Eigen::Index>(n)).setZero();
  return v;
}

/// Row sums accumulated left to right starting from the first column, so a
/// single column is returned bit-for-bit.
Vector sum_heads(const Matrix& m) {
  Vector s(m.rows());
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    double acc = m(t, 0);
    for (Eigen::Index h = 1; h < m.cols(); ++h) acc += m(t, h);
    s(t) = acc;
  }
  return s;
}

Matrix summed_rewards(const Matrix& r, std::size_t n) {
  const Matrix top = r.topRows(static_cast<Eigen::Index>(n));
  Matrix out(top.rows(), 1);
  out.col(0) = sum_heads(top);
  return out;
}

Vector prepare_advantages(const Vector& adv, std::span<const std::size_t> idx, bool normalize) {
  const Vector a = ppo::gather(adv, idx);
  return normalize ? ppo::normalize(a) : a;
}

void step_actor1(AgentNets& nets, const ppo::RolloutBuffer& buf, std::span<const std::size_t> idx,
                 const Vector& summed_adv, const ppo::PpoHyper& hyper, UpdateStats& stats) {
  const Matrix states = ppo::gather_cols(buf.s1, idx);
  std::vector<std::uint64_t> actions(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) actions[j] = buf.a1[idx[j]];
  const Vector old_logp = ppo::gather(buf.logp1, idx);
  const Vector adv = prepare_advantages(summed_adv, idx, hyper.normalize_advantages);
  nn::MlpGradients grads;
  const auto loss = ppo::categorical_actor_loss(nets.actor1.net, states, actions, old_logp, adv, hyper.clip,
                                                hyper.entropy_discrete, &grads);
  ppo::apply_gradients(nets.actor1, grads);
  stats.actor1_loss += loss.loss;
}

void step_actor2(AgentNets& nets, const ppo::RolloutBuffer& buf, std::span<const std::size_t> idx,
                 const Vector& summed_adv, const ppo::PpoHyper& hyper, UpdateStats& stats) {
  const Matrix states = ppo::gather_cols(buf.s2, idx);
  const Matrix raw = ppo::gather_cols(buf.a2_raw, idx);
  const Vector old_logp = ppo::gather(buf.logp2, idx);
  const Vector adv = prepare_advantages(summed_adv, idx, hyper.normalize_advantages);
  nn::MlpGradients grads;
  Vector log_std_grad;
  const auto loss = ppo::gaussian_actor_loss(nets.actor2.net, nets.actor2.log_std, states, raw, old_logp, adv,
                                             hyper.clip, hyper.entropy_continuous, &grads, &log_std_grad);
  ppo::apply_gradients(nets.actor2, grads, log_std_grad);
  stats.actor2_loss += loss.loss;
}

Vector step_critic(ppo::CriticHeads& critic, const Matrix& all_states, const Matrix& targets_hxn,
                   std::span<const std::size_t> idx) {
  const Matrix states = ppo::gather_cols(all_states, idx);
  const Matrix targets = ppo::gather_cols(targets_hxn, idx);
  nn::MlpGradients grads;
  const auto loss = ppo::critic_loss(critic.net, states, targets, &grads);
  ppo::apply_gradients(critic, grads);
  return loss.per_head;
}

void finish_round(UpdateStats& stats, Vector& loss_acc, std::int64_t batches) {
  if (batches > 0) {
    stats.critic_loss = loss_acc / static_cast<double>(batches);
    stats.actor1_loss /= static_cast<double>(batches);
    stats.actor2_loss /= static_cast<double>(batches);
  }
}

void maybe_sync(AgentNets& nets, const ppo::PpoHyper& hyper, UpdateStats& stats) {
  ++nets.epochs_done;
  if (nets.epochs_done % hyper.target_sync == 0) {
    nets.critic1.sync_target();
    if (nets.critic2) nets.critic2->sync_target();
    ++nets.target_syncs;
    ++stats.target_syncs;
  }
}

/// UCHA and HAPPO share this path: both actors read advantages computed from
/// the one critic on s1. `summed` collapses the VU dimension first (HAPPO).
UpdateStats shared_critic_update(AgentNets& nets, const ppo::RolloutBuffer& buf, const ppo::PpoHyper& hyper,
                                 rng::RandomStream& stream, bool summed) {
  const std::size_t n = buf.size;
  UpdateStats stats;
  if (n == 0) return stats;

  const Matrix values = target_values(nets.critic1.target, buf.s1, n, buf.next_s1, buf.next_terminal);
  const Matrix r1 = summed ? summed_rewards(buf.r1, n) : Matrix(buf.r1.topRows(static_cast<Eigen::Index>(n)));
  const Matrix r2 = summed ? summed_rewards(buf.r2, n) : Matrix(buf.r2.topRows(static_cast<Eigen::Index>(n)));
  if (values.cols() != r1.cols()) throw std::logic_error("critic head count does not match the reward vector");

  const std::span<const std::uint8_t> done(buf.done.data(), n);
  const Matrix adv1 = ppo::compute_gae(r1, values, done, hyper.gamma, hyper.lambda);
  const Matrix adv2 = ppo::compute_gae(r2, values, done, hyper.gamma, hyper.lambda);
  const Matrix targets = ppo::value_targets(adv1, values, hyper.gamma, hyper.value_target).transpose();
  const Vector sum_adv1 = sum_heads(adv1);
  const Vector sum_adv2 = sum_heads(adv2);

  Vector loss_acc = Vector::Zero(static_cast<Eigen::Index>(nets.critic1.heads()));
  std::int64_t batches = 0;
  for (int k = 0; k < hyper.epochs; ++k) {
    for (const auto& idx : ppo::minibatch_iterate(n, static_cast<std::size_t>(hyper.minibatch), stream)) {
      step_actor1(nets, buf, idx, sum_adv1, hyper, stats);
      step_actor2(nets, buf, idx, sum_adv2, hyper, stats);
      loss_acc += step_critic(nets.critic1, buf.s1, targets, idx);
      ++batches;
    }
    maybe_sync(nets, hyper, stats);
  }
  stats.minibatch_steps = batches;
  finish_round(stats, loss_acc, batches);
  ++nets.policy_version;
  return stats;
}

}  // namespace

UpdateStats update_ucha(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                        rng::RandomStream& stream) {
  return shared_critic_update(nets, buffer, hyper, stream, false);
}

UpdateStats update_happo(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                         rng::RandomStream& stream) {
  return shared_critic_update(nets, buffer, hyper, stream, true);
}

UpdateStats update_ippo(AgentNets& nets, const ppo::RolloutBuffer& buf, const ppo::PpoHyper& hyper,
                        rng::RandomStream& stream, UpdateMask mask) {
  if (!nets.critic2) throw std::logic_error("update_ippo needs an agent-2 critic");
  const std::size_t n = buf.size;
  UpdateStats stats;
  if (n == 0) return stats;
  const std::span<const std::uint8_t> done(buf.done.data(), n);
  const auto rows = static_cast<Eigen::Index>(n);

  const Matrix values1 = target_values(nets.critic1.target, buf.s1, n, buf.next_s1, buf.next_terminal);
  const Matrix adv1 = ppo::compute_gae(buf.r1.topRows(rows), values1, done, hyper.gamma, hyper.lambda);
  const Matrix targets1 = ppo::value_targets(adv1, values1, hyper.gamma, hyper.value_target).transpose();
  const Vector sum_adv1 = sum_heads(adv1);

  const Matrix values2 = target_values(nets.critic2->target, buf.s2, n, buf.next_s2, buf.next_terminal);
  const Matrix adv2 = ppo::compute_gae(buf.r2.topRows(rows), values2, done, hyper.gamma, hyper.lambda);
  const Matrix targets2 = ppo::value_targets(adv2, values2, hyper.gamma, hyper.value_target).transpose();
  const Vector sum_adv2 = sum_heads(adv2);

  // Each learner shuffles with its own stream, both seeded up front, so
  // masking one agent never changes the other's minibatches.
  rng::RandomStream stream1(stream.next());
  rng::RandomStream stream2(stream.next());

  Vector loss1 = Vector::Zero(static_cast<Eigen::Index>(nets.critic1.heads()));
  Vector loss2 = Vector::Zero(static_cast<Eigen::Index>(nets.critic2->heads()));
  std::int64_t batches = 0;
  std::int64_t batches2 = 0;
  for (int k = 0; k < hyper.epochs; ++k) {
    if (mask.agent1) {
      for (const auto& idx : ppo::minibatch_iterate(n, static_cast<std::size_t>(hyper.minibatch), stream1)) {
        step_actor1(nets, buf, idx, sum_adv1, hyper, stats);
        loss1 += step_critic(nets.critic1, buf.s1, targets1, idx);
        ++batches;
      }
    }
    if (mask.agent2) {
      for (const auto& idx : ppo::minibatch_iterate(n, static_cast<std::size_t>(hyper.minibatch), stream2)) {
        step_actor2(nets, buf, idx, sum_adv2, hyper, stats);
        loss2 += step_critic(*nets.critic2, buf.s2, targets2, idx);
        ++batches2;
      }
    }
    maybe_sync(nets, hyper, stats);
  }
  stats.minibatch_steps = std::max(batches, batches2);
  if (batches > 0) {
    stats.critic_loss = loss1 / static_cast<double>(batches);
    stats.actor1_loss /= static_cast<double>(batches);
  }
  if (batches2 > 0) {
    stats.critic2_loss = loss2 / static_cast<double>(batches2);
    stats.actor2_loss /= static_cast<double>(batches2);
  }
  ++nets.policy_version;
  return stats;
}

UpdateStats update(AgentNets& nets, const ppo::RolloutBuffer& buffer, const ppo::PpoHyper& hyper,
                   rng::RandomStream& stream) {
  if (buffer.policy_version != nets.policy_version) {
    throw std::logic_error("update: buffer was produced by policy version " +
                           std::to_string(buffer.policy_version) + ", current is " +
                           std::to_string(nets.policy_version));
  }
  switch (nets.kind) {
    case AlgorithmKind::kUcha: return update_ucha(nets, buffer, hyper, stream);
    case AlgorithmKind::kHappo: return update_happo(nets, buffer, hyper, stream);
    case AlgorithmKind::kIppo: return update_ippo(nets, buffer, hyper, stream);
    case AlgorithmKind::kRandom: return {};
  }
  return {};
}

EvalReport evaluate(const env::EnvConfig& config, const std::vector<env::VuProfile>& profiles, AlgorithmKind kind,
                    const AgentNets* nets, int episodes, const rng::RandomStream& stream, ActionMode mode,
                    bool keep_logs) {
  if (kind != AlgorithmKind::kRandom && nets == nullptr) {
    throw std::invalid_argument("evaluate: learned policies need networks");
  }
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  env::EnvConfig cfg = config;
  cfg.early_termination = false;
  env::VrEnv environment(cfg, profiles, stream.substream("env"));
  auto policy = stream.substream("policy");

  const std::size_t n_vus = profiles.size();
  const std::size_t rungs = cfg.ladder().size() + 1;
  EvalReport rep;
  rep.episodes = episodes;
  rep.fps.assign(n_vus, 0.0);
  rep.energy_per_vu.assign(n_vus, 0.0);
  rep.local_per_vu.assign(n_vus, 0.0);
  rep.rung_counts.assign(n_vus, std::vector<double>(rungs, 0.0));

  for (int e = 0; e < episodes; ++e) {
    environment.reset();
    EpisodeLog log;
    double total = 0.0;
    int length = 0;
    while (!environment.state().done) {
      const auto s1v = environment.observe_agent1();
      const Vector s1 = Eigen::Map<const Vector>(s1v.data(), static_cast<Eigen::Index>(s1v.size()));
      const JointAction act = kind == AlgorithmKind::kRandom
                                  ? random_action(n_vus, cfg.num_channels, policy)
                                  : select_action(*nets, s1, mode, policy);
      const auto out = environment.step(act.z, act.portions);
      ++length;
      for (std::size_t n = 0; n < n_vus; ++n) {
        total += out.r1[n];
        rep.energy_per_vu[n] += out.energy[n];
        rep.sum_energy += out.energy[n];
        if (act.z.z[n] == 0) rep.local_per_vu[n] += 1.0;
        // A late server frame was not received: it counts on the failure rung.
        const std::size_t rung = out.success[n] != 0 ? static_cast<std::size_t>(out.rung[n]) : rungs - 1;
        rep.rung_counts[n][rung] += 1.0;
      }
      if (keep_logs) {
        log.success.push_back(out.success);
        log.energy.push_back(out.energy);
        log.rung.push_back(out.rung);
        log.r1.push_back(out.r1);
      }
    }
    const auto& st = environment.state();
    int worst = std::numeric_limits<int>::max();
    for (std::size_t n = 0; n < n_vus; ++n) {
      rep.fps[n] += st.succ_count[n];
      worst = std::min(worst, st.succ_count[n] - profiles[n].tau_f);
    }
    rep.episode_rewards.push_back(total);
    rep.episode_worst.push_back(worst);
    rep.episode_length = length;
    if (keep_logs) rep.logs.push_back(std::move(log));
  }

  const double inv = 1.0 / episodes;
  rep.mean_reward = std::accumulate(rep.episode_rewards.begin(), rep.episode_rewards.end(), 0.0) * inv;
  double var = 0.0;
  for (double r : rep.episode_rewards) var += (r - rep.mean_reward) * (r - rep.mean_reward);
  rep.reward_std = std::sqrt(var * inv);
  rep.worst_vu = std::accumulate(rep.episode_worst.begin(), rep.episode_worst.end(), 0.0) * inv;
  rep.sum_energy *= inv;
  for (std::size_t n = 0; n < n_vus; ++n) {
    rep.fps[n] *= inv;
    rep.energy_per_vu[n] *= inv;
    rep.local_per_vu[n] *= inv;
    for (auto& c : rep.rung_counts[n]) c *= inv;
  }
  return rep;
}

Trainer::Trainer(TrainerSetup setup)
    : setup_(std::move(setup)),
      env_(setup_.env, setup_.profiles, rng::RandomStream(setup_.seed).substream("train_env")),
      policy_stream_(rng::RandomStream(setup_.seed).substream("policy")),
      minibatch_stream_(rng::RandomStream(setup_.seed).substream("minibatch")),
      eval_stream_(rng::RandomStream(setup_.seed).substream("eval")) {
  setup_.hyper.validate();
  nets_ = make_nets(setup_.kind, setup_.profiles.size(), setup_.env.num_channels, setup_.network, setup_.hyper,
                    rng::RandomStream(setup_.seed).substream("init"));
  env_.reset();
}

std::int64_t Trainer::collect(ppo::RolloutBuffer& buffer, std::int64_t max_steps,
                              const std::function<void(std::int64_t)>& on_step) {
  const bool learner = setup_.kind != AlgorithmKind::kRandom;
  if (learner && buffer.size == 0) buffer.policy_version = nets_.policy_version;
  if (learner && buffer.policy_version != nets_.policy_version) {
    throw std::logic_error("collect: buffer holds data from an older policy");
  }
  const std::size_t n_vus = env_.num_vus();
  std::int64_t taken = 0;
  while (taken < max_steps && !(learner && buffer.full())) {
    const auto t0 = Clock::now();
    const auto s1v = env_.observe_agent1();
    const Vector s1 = Eigen::Map<const Vector>(s1v.data(), static_cast<Eigen::Index>(s1v.size()));
    const JointAction act = learner ? select_action(nets_, s1, ActionMode::kSample, policy_stream_)
                                    : random_action(n_vus, env_.num_channels(), policy_stream_);
    const auto out = env_.step(act.z, act.portions);
    timing_.exec_ms += ms_since(t0);
    ++timing_.exec_steps;

    if (learner) {
      buffer.push(s1, act.s2, act.index, act.raw, act.logp1, act.logp2, out.r1, out.r2, out.done);
    }
    for (double r : out.r1) episode_return_ += r;
    if (out.done) {
      finished_returns_.push_back(episode_return_);
      episode_return_ = 0.0;
      env_.reset();
    }
    ++step_;
    ++taken;
    if (on_step) on_step(step_);
  }

  if (learner && buffer.size > 0) {
    buffer.next_terminal = buffer.done[buffer.size - 1] != 0;
    if (!buffer.next_terminal) {
      const auto s1v = env_.observe_agent1();
      buffer.next_s1 = Eigen::Map<const Vector>(s1v.data(), static_cast<Eigen::Index>(s1v.size()));
      rng::RandomStream unused(0);
      const JointAction greedy = select_action(nets_, buffer.next_s1, ActionMode::kGreedy, unused);
      buffer.next_s2 = greedy.s2;
    }
  }
  return taken;
}

EvalReport Trainer::evaluate_now(int episodes, ActionMode mode, bool keep_logs) const {
  return evaluate(setup_.env, setup_.profiles, setup_.kind,
                  setup_.kind == AlgorithmKind::kRandom ? nullptr : &nets_, episodes, eval_stream_, mode, keep_logs);
}

void Trainer::train(std::int64_t total_steps, std::int64_t eval_interval, int eval_episodes, ActionMode eval_mode,
                    const std::function<void(const EvalEvent&)>& on_eval) {
  if (total_steps <= 0) throw std::invalid_argument("train: total_steps must be > 0");
  if (eval_interval <= 0) throw std::invalid_argument("train: eval_interval must be > 0");
  const std::size_t n_vus = setup_.profiles.size();
  const auto m = static_cast<std::size_t>(setup_.env.num_channels);
  ppo::RolloutBuffer buffer(static_cast<std::size_t>(setup_.hyper.segment), env::agent1_state_dim(n_vus, m),
                            env::agent2_state_dim(n_vus, m), n_vus);

  const Eigen::Index heads = static_cast<Eigen::Index>(nets_.critic1.heads());
  Vector loss_acc = Vector::Zero(heads);
  int loss_count = 0;
  Vector last_loss = Vector::Constant(heads, std::numeric_limits<double>::quiet_NaN());
  std::size_t returns_seen = 0;

  auto on_step = [&](std::int64_t step) {
    if (step % eval_interval != 0 || !on_eval) return;
    EvalEvent ev;
    ev.step = step;
    ev.report = evaluate_now(eval_episodes, eval_mode);
    if (loss_count > 0) {
      last_loss = loss_acc / loss_count;
      loss_acc.setZero();
      loss_count = 0;
    }
    ev.critic_loss = last_loss;
    if (finished_returns_.size() > returns_seen) {
      double s = 0.0;
      for (std::size_t i = returns_seen; i < finished_returns_.size(); ++i) s += finished_returns_[i];
      ev.train_reward = s / static_cast<double>(finished_returns_.size() - returns_seen);
      returns_seen = finished_returns_.size();
    } else {
      ev.train_reward = std::numeric_limits<double>::quiet_NaN();
    }
    on_eval(ev);
  };

  while (step_ < total_steps) {
    buffer.clear();
    collect(buffer, std::min<std::int64_t>(setup_.hyper.segment, total_steps - step_), on_step);
    if (setup_.kind == AlgorithmKind::kRandom || buffer.size == 0) continue;
    const auto t0 = Clock::now();
    UpdateStats stats = update(nets_, buffer, setup_.hyper, minibatch_stream_);
    timing_.train_ms += ms_since(t0);
    timing_.train_steps += stats.minibatch_steps;
    if (stats.critic_loss.size() == heads) {
      loss_acc += stats.critic_loss;
      ++loss_count;
    }
    history_.push_back(std::move(stats));
  }
}

}  // namespace ucha::train
