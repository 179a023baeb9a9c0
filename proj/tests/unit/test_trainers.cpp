#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "ucha/trainers.hpp"

using namespace ucha;
using namespace ucha::train;

namespace {

std::vector<env::VuProfile> profiles_for(std::size_t n, std::uint64_t seed) {
  env::EnvConfig cfg;
  auto s = rng::RandomStream(seed).substream("scenario");
  return env::sample_profiles(n, cfg, {}, {}, s);
}

TrainerSetup small_setup(AlgorithmKind kind, std::size_t n, std::uint64_t seed) {
  TrainerSetup setup;
  setup.env.num_channels = 2;
  setup.env.bandwidth_hz = {1.8e6, 1.8e6};
  setup.profiles = profiles_for(n, seed);
  setup.hyper.epochs = 2;
  setup.hyper.minibatch = 32;
  setup.hyper.segment = 128;
  setup.hyper.target_sync = 1;
  setup.hyper.actor_adam.lr = 1e-3;
  setup.hyper.critic_adam.lr = 1e-3;
  setup.network.hidden = {16, 16};
  setup.kind = kind;
  setup.seed = seed;
  return setup;
}

bool same_bits(const nn::Mlp& a, const nn::Mlp& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    const auto& x = a.layers()[l];
    const auto& y = b.layers()[l];
    if (x.weight.size() != y.weight.size() || x.bias.size() != y.bias.size()) return false;
    if (std::memcmp(x.weight.data(), y.weight.data(), sizeof(double) * x.weight.size()) != 0) return false;
    if (std::memcmp(x.bias.data(), y.bias.data(), sizeof(double) * x.bias.size()) != 0) return false;
  }
  return true;
}

bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

ppo::RolloutBuffer collect_segment(Trainer& t) {
  const auto& s = t.setup();
  const auto n = s.profiles.size();
  const auto m = static_cast<std::size_t>(s.env.num_channels);
  ppo::RolloutBuffer buf(static_cast<std::size_t>(s.hyper.segment), env::agent1_state_dim(n, m),
                         env::agent2_state_dim(n, m), n);
  t.collect(buf, s.hyper.segment);
  return buf;
}

}  // namespace

TEST(Algorithms, NamesRoundTrip) {
  for (auto k : {AlgorithmKind::kUcha, AlgorithmKind::kHappo, AlgorithmKind::kIppo, AlgorithmKind::kRandom}) {
    EXPECT_EQ(parse_algorithm(to_string(k)), k);
  }
  EXPECT_THROW(parse_algorithm("mappo"), std::invalid_argument);
}

TEST(Nets, HeadCounts) {
  const ppo::PpoHyper h;
  NetworkConfig net;
  net.hidden = {8};
  const rng::RandomStream init(1);
  EXPECT_EQ(make_nets(AlgorithmKind::kUcha, 3, 2, net, h, init).critic1.heads(), 3u);
  EXPECT_EQ(make_nets(AlgorithmKind::kHappo, 3, 2, net, h, init).critic1.heads(), 1u);
  const auto ippo = make_nets(AlgorithmKind::kIppo, 3, 2, net, h, init);
  ASSERT_TRUE(ippo.critic2.has_value());
  EXPECT_EQ(ippo.critic2->heads(), 3u);
  EXPECT_EQ(ippo.critic2->net.input_dim(), env::agent2_state_dim(3, 2));
  EXPECT_EQ(ippo.actor1.net.output_dim(), 27u);
  EXPECT_EQ(ippo.actor2.net.output_dim(), 3u);
}

TEST(Actions, SelectAndRandom) {
  const ppo::PpoHyper h;
  NetworkConfig net;
  net.hidden = {8};
  const auto nets = make_nets(AlgorithmKind::kUcha, 3, 2, net, h, rng::RandomStream(2));
  rng::RandomStream s(3);
  const Vector s1 = Vector::Constant(static_cast<Eigen::Index>(env::agent1_state_dim(3, 2)), 0.1);
  for (auto mode : {ActionMode::kSample, ActionMode::kGreedy}) {
    const auto a = select_action(nets, s1, mode, s);
    EXPECT_EQ(env::encode_action(a.z, 2), a.index);
    EXPECT_EQ(a.s2.size(), static_cast<Eigen::Index>(env::agent2_state_dim(3, 2)));
    EXPECT_NO_THROW(a.portions.validate());
    EXPECT_TRUE(std::isfinite(a.logp1));
    EXPECT_TRUE(std::isfinite(a.logp2));
  }
  for (int i = 0; i < 100; ++i) {
    const auto r = random_action(3, 2, s);
    EXPECT_LT(r.index, 27u);
    EXPECT_NO_THROW(r.portions.validate());
  }
}

TEST(Degeneration, SingleVuUchaEqualsHappoBitForBit) {
  Trainer u(small_setup(AlgorithmKind::kUcha, 1, 11));
  Trainer h(small_setup(AlgorithmKind::kHappo, 1, 11));
  ASSERT_TRUE(same_bits(u.nets().critic1.net, h.nets().critic1.net));
  u.train(3 * 128, 1000, 1, ActionMode::kSample, {});
  h.train(3 * 128, 1000, 1, ActionMode::kSample, {});
  ASSERT_EQ(u.update_history().size(), 3u);
  EXPECT_TRUE(same_bits(u.nets().actor1.net, h.nets().actor1.net));
  EXPECT_TRUE(same_bits(u.nets().actor2.net, h.nets().actor2.net));
  EXPECT_TRUE(same_bits(u.nets().actor2.log_std, h.nets().actor2.log_std));
  EXPECT_TRUE(same_bits(u.nets().critic1.net, h.nets().critic1.net));
  EXPECT_TRUE(same_bits(u.nets().critic1.target, h.nets().critic1.target));
}

TEST(Degeneration, MultiVuUchaAndHappoDiffer) {
  Trainer u(small_setup(AlgorithmKind::kUcha, 3, 12));
  Trainer h(small_setup(AlgorithmKind::kHappo, 3, 12));
  u.train(128, 1000, 1, ActionMode::kSample, {});
  h.train(128, 1000, 1, ActionMode::kSample, {});
  EXPECT_FALSE(same_bits(u.nets().actor1.net, h.nets().actor1.net));
}

TEST(Update, ZeroAdvantageLeavesNetworksUnchanged) {
  auto setup = small_setup(AlgorithmKind::kUcha, 2, 13);
  setup.hyper.entropy_discrete = 0.0;
  setup.hyper.entropy_continuous = 0.0;
  Trainer t(setup);
  // A zero critic predicts 0 everywhere; with zero rewards every advantage is 0.
  for (auto& layer : t.nets().critic1.net.layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  t.nets().critic1.sync_target();
  auto buf = collect_segment(t);
  buf.r1.setZero();
  buf.r2.setZero();
  const auto before = t.nets();
  rng::RandomStream s(1);
  update(t.nets(), buf, setup.hyper, s);
  EXPECT_TRUE(same_bits(before.actor1.net, t.nets().actor1.net));
  EXPECT_TRUE(same_bits(before.actor2.net, t.nets().actor2.net));
  EXPECT_TRUE(same_bits(before.actor2.log_std, t.nets().actor2.log_std));
  EXPECT_TRUE(same_bits(before.critic1.net, t.nets().critic1.net));
  EXPECT_EQ(t.nets().policy_version, before.policy_version + 1);
}

TEST(Update, StaleBufferIsRejected) {
  auto setup = small_setup(AlgorithmKind::kUcha, 2, 14);
  Trainer t(setup);
  auto buf = collect_segment(t);
  rng::RandomStream s(2);
  update(t.nets(), buf, setup.hyper, s);
  EXPECT_THROW(update(t.nets(), buf, setup.hyper, s), std::logic_error);
  EXPECT_THROW(t.collect(buf, 1), std::logic_error);
}

TEST(Update, IppoAgentsAreIsolated) {
  auto setup = small_setup(AlgorithmKind::kIppo, 2, 15);
  Trainer t(setup);
  const auto buf = collect_segment(t);
  const auto start = t.nets();

  auto only1 = start;
  rng::RandomStream s1(3);
  update_ippo(only1, buf, setup.hyper, s1, {true, false});
  EXPECT_FALSE(same_bits(only1.actor1.net, start.actor1.net));
  EXPECT_TRUE(same_bits(only1.actor2.net, start.actor2.net));
  EXPECT_TRUE(same_bits(only1.actor2.log_std, start.actor2.log_std));
  EXPECT_TRUE(same_bits(only1.critic2->net, start.critic2->net));

  auto only2 = start;
  rng::RandomStream s2(3);
  update_ippo(only2, buf, setup.hyper, s2, {false, true});
  EXPECT_TRUE(same_bits(only2.actor1.net, start.actor1.net));
  EXPECT_TRUE(same_bits(only2.critic1.net, start.critic1.net));
  EXPECT_FALSE(same_bits(only2.actor2.net, start.actor2.net));

  // Joint update = the two isolated updates side by side.
  auto both = start;
  rng::RandomStream s3(3);
  update_ippo(both, buf, setup.hyper, s3);
  EXPECT_TRUE(same_bits(both.actor1.net, only1.actor1.net));
  EXPECT_TRUE(same_bits(both.critic1.net, only1.critic1.net));
  EXPECT_TRUE(same_bits(both.actor2.net, only2.actor2.net));
  EXPECT_TRUE(same_bits(both.critic2->net, only2.critic2->net));
}

TEST(Update, IppoLearnersReadOnlyTheirOwnRewards) {
  auto setup = small_setup(AlgorithmKind::kIppo, 2, 24);
  Trainer t(setup);
  const auto buf = collect_segment(t);
  auto other_r2 = buf;
  other_r2.r2 = other_r2.r2.array() * -3.0 + 1.0;
  auto other_r1 = buf;
  other_r1.r1 = other_r1.r1.array() * 2.0 - 0.5;

  auto base = t.nets();
  auto a = t.nets();
  auto b = t.nets();
  rng::RandomStream s0(6), s1(6), s2(6);
  update_ippo(base, buf, setup.hyper, s0);
  update_ippo(a, other_r2, setup.hyper, s1);
  update_ippo(b, other_r1, setup.hyper, s2);
  EXPECT_TRUE(same_bits(a.actor1.net, base.actor1.net));
  EXPECT_TRUE(same_bits(a.critic1.net, base.critic1.net));
  EXPECT_FALSE(same_bits(a.actor2.net, base.actor2.net));
  EXPECT_TRUE(same_bits(b.actor2.net, base.actor2.net));
  EXPECT_TRUE(same_bits(b.critic2->net, base.critic2->net));
  EXPECT_FALSE(same_bits(b.actor1.net, base.actor1.net));
}

TEST(Update, TargetSyncCounting) {
  for (int period : {1, 3}) {
    auto setup = small_setup(AlgorithmKind::kUcha, 2, 16);
    setup.hyper.epochs = 10;
    setup.hyper.target_sync = period;
    Trainer t(setup);
    const auto buf = collect_segment(t);
    rng::RandomStream s(4);
    const auto stats = update(t.nets(), buf, setup.hyper, s);
    EXPECT_EQ(stats.target_syncs, 10 / period);
    EXPECT_EQ(t.nets().epochs_done, 10);
    EXPECT_EQ(t.nets().target_syncs, 10 / period);
    EXPECT_EQ(stats.minibatch_steps, 10 * 4);
    EXPECT_EQ(same_bits(t.nets().critic1.net, t.nets().critic1.target), 10 % period == 0);
  }
}

TEST(Update, CriticLossFallsOnFrozenPolicy) {
  auto setup = small_setup(AlgorithmKind::kUcha, 3, 17);
  setup.hyper.actor_adam.lr = 1e-12;
  setup.hyper.critic_adam.lr = 1e-2;
  setup.hyper.target_sync = 100000;
  setup.hyper.segment = 256;
  Trainer t(setup);
  const auto buf = collect_segment(t);
  rng::RandomStream s(5);
  std::vector<Vector> losses;
  for (int round = 0; round < 50; ++round) losses.push_back(update_ucha(t.nets(), buf, setup.hyper, s).critic_loss);
  for (Eigen::Index h = 0; h < 3; ++h) EXPECT_LT(losses.back()(h), 0.5 * losses.front()(h)) << "head " << h;
}

TEST(Rollout, StoredLogProbsRecompute) {
  for (auto kind : {AlgorithmKind::kUcha, AlgorithmKind::kIppo}) {
    Trainer t(small_setup(kind, 3, 18));
    const auto buf = collect_segment(t);
    ASSERT_EQ(buf.size, 128u);
    for (std::size_t i = 0; i < buf.size; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      const Vector logits = t.nets().actor1.net.forward(Vector(buf.s1.col(c)));
      const double lp1 = logits(static_cast<Eigen::Index>(buf.a1[i])) - nn::log_sum_exp(logits);
      ASSERT_NEAR(lp1, buf.logp1(c), 1e-10);
      const Vector mean = t.nets().actor2.net.forward(Vector(buf.s2.col(c)));
      ASSERT_NEAR(nn::gaussian_log_prob(mean, t.nets().actor2.log_std, buf.a2_raw.col(c)), buf.logp2(c), 1e-10);
      // s2 carries the decoded assignment of a1
      const auto z = env::decode_action(buf.a1[i], 3, 2);
      for (int n = 0; n < 3; ++n) ASSERT_EQ(buf.s2(n, c), z.z[static_cast<std::size_t>(n)] / 2.0);
    }
  }
}

TEST(Rollout, SegmentBootstrap) {
  Trainer t(small_setup(AlgorithmKind::kUcha, 2, 19));
  const auto buf = collect_segment(t);
  EXPECT_EQ(buf.next_terminal, buf.done[buf.size - 1] != 0);
  if (!buf.next_terminal) {
    // The bootstrap state is the one the environment now shows.
    const auto obs = t.nets().actor1.net.input_dim();
    ASSERT_EQ(static_cast<std::size_t>(buf.next_s1.size()), obs);
    Trainer probe(small_setup(AlgorithmKind::kUcha, 2, 19));
    auto again = collect_segment(probe);
    EXPECT_EQ(again.next_s1, buf.next_s1);
    EXPECT_EQ(buf.next_s2.size(), buf.s2.rows());
  }
}

TEST(Evaluate, RandomRunsFullEpisodes) {
  env::EnvConfig cfg;
  const auto profiles = profiles_for(4, 20);
  const auto rep = evaluate(cfg, profiles, AlgorithmKind::kRandom, nullptr, 3, rng::RandomStream(1));
  EXPECT_EQ(rep.episode_length, 90);
  EXPECT_EQ(rep.episode_rewards.size(), 3u);
  for (const auto& counts : rep.rung_counts) {
    double total = 0.0;
    for (double c : counts) total += c;
    EXPECT_NEAR(total, 90.0, 1e-9);
  }
  EXPECT_THROW(evaluate(cfg, profiles, AlgorithmKind::kUcha, nullptr, 1, rng::RandomStream(1)),
               std::invalid_argument);
}

TEST(Evaluate, AggregatesMatchEpisodeLogs) {
  auto setup = small_setup(AlgorithmKind::kUcha, 3, 21);
  Trainer t(setup);
  const auto rep = t.evaluate_now(3, ActionMode::kSample, true);
  ASSERT_EQ(rep.logs.size(), 3u);
  double worst_sum = 0.0, energy_sum = 0.0, reward_sum = 0.0;
  for (const auto& log : rep.logs) {
    ASSERT_EQ(log.success.size(), 90u);
    std::vector<int> succ(3, 0);
    for (std::size_t step = 0; step < log.success.size(); ++step) {
      for (std::size_t n = 0; n < 3; ++n) {
        succ[n] += log.success[step][n];
        energy_sum += log.energy[step][n];
        reward_sum += log.r1[step][n];
      }
    }
    int worst = 1 << 30;
    for (std::size_t n = 0; n < 3; ++n) worst = std::min(worst, succ[n] - setup.profiles[n].tau_f);
    worst_sum += worst;
  }
  EXPECT_NEAR(rep.worst_vu, worst_sum / 3.0, 1e-12);
  EXPECT_NEAR(rep.sum_energy, energy_sum / 3.0, 1e-12);
  EXPECT_NEAR(rep.mean_reward, reward_sum / 3.0, 1e-9);
  // Same stream, same policy: evaluation is repeatable.
  const auto again = t.evaluate_now(3, ActionMode::kSample);
  EXPECT_EQ(again.episode_rewards, rep.episode_rewards);
}

TEST(Trainer, DeterministicAndEvalSchedule) {
  auto setup = small_setup(AlgorithmKind::kUcha, 2, 22);
  std::vector<std::int64_t> steps;
  std::vector<double> rewards_a, rewards_b;
  std::vector<Vector> losses;
  Trainer a(setup);
  a.train(400, 100, 1, ActionMode::kSample, [&](const EvalEvent& e) {
    steps.push_back(e.step);
    rewards_a.push_back(e.report.mean_reward);
    losses.push_back(e.critic_loss);
  });
  Trainer b(setup);
  b.train(400, 100, 1, ActionMode::kSample, [&](const EvalEvent& e) { rewards_b.push_back(e.report.mean_reward); });
  EXPECT_EQ(steps, (std::vector<std::int64_t>{100, 200, 300, 400}));
  EXPECT_EQ(rewards_a, rewards_b);
  EXPECT_TRUE(same_bits(a.nets().actor1.net, b.nets().actor1.net));
  // The first update happens after step 128.
  EXPECT_TRUE(std::isnan(losses[0](0)));
  EXPECT_TRUE(std::isfinite(losses[1](0)));
  EXPECT_EQ(a.global_step(), 400);
  EXPECT_EQ(a.timing().exec_steps, 400);
  EXPECT_GT(a.timing().train_steps, 0);
}

TEST(Trainer, RandomNeverUpdates) {
  auto setup = small_setup(AlgorithmKind::kRandom, 2, 23);
  Trainer t(setup);
  const auto before = t.nets();
  int events = 0;
  t.train(300, 100, 1, ActionMode::kSample, [&](const EvalEvent&) { ++events; });
  EXPECT_EQ(events, 3);
  EXPECT_TRUE(t.update_history().empty());
  EXPECT_TRUE(same_bits(before.actor1.net, t.nets().actor1.net));
}
