#include <benchmark/benchmark.h>

#include "ucha/trainers.hpp"
#include "ucha/vr_env.hpp"

using namespace ucha;

namespace {

std::vector<env::VuProfile> profiles(int n, const env::EnvConfig& cfg) {
  rng::RandomStream s(7);
  return env::sample_profiles(static_cast<std::size_t>(n), cfg, {}, {}, s);
}

void BM_EnvStep(benchmark::State& state) {
  const env::EnvConfig cfg;
  const int n = static_cast<int>(state.range(0));
  env::VrEnv e(cfg, profiles(n, cfg), rng::RandomStream(1));
  rng::RandomStream policy(2);
  e.reset();
  for (auto _ : state) {
    const auto a = train::random_action(static_cast<std::size_t>(n), cfg.num_channels, policy);
    const auto out = e.step(a.z, a.portions);
    if (out.done) e.reset();
    benchmark::DoNotOptimize(out.r1.data());
  }
}
BENCHMARK(BM_EnvStep)->Arg(5)->Arg(8);

void BM_AchievableRates(benchmark::State& state) {
  const env::EnvConfig cfg;
  const auto p = profiles(8, cfg);
  rng::RandomStream s(3);
  std::vector<double> dist;
  for (const auto& v : p) dist.push_back(v.distance_m);
  const auto gains = channel::draw_slot_gains(dist, cfg.num_channels, cfg.fading, s);
  const auto a = train::random_action(8, cfg.num_channels, s);
  const auto power = env::portions_to_power(a.portions, a.z, cfg.p_max);
  for (auto _ : state) {
    auto r = env::achievable_rates(a.z, power, gains, cfg);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_AchievableRates);

void BM_PolicyInference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto hidden = static_cast<std::size_t>(state.range(1));
  ppo::PpoHyper hyper;
  const auto nets = train::make_nets(train::AlgorithmKind::kUcha, static_cast<std::size_t>(n), 3, {{hidden, hidden}, 0.0},
                                     hyper, rng::RandomStream(4));
  rng::RandomStream s(5);
  const nn::Vector s1 = nn::Vector::Random(static_cast<Eigen::Index>(env::agent1_state_dim(static_cast<std::size_t>(n), 3)));
  for (auto _ : state) {
    auto a = train::select_action(nets, s1, train::ActionMode::kSample, s);
    benchmark::DoNotOptimize(a.logp1);
  }
}
BENCHMARK(BM_PolicyInference)->Args({5, 64})->Args({8, 32})->Args({8, 64})->Unit(benchmark::kMicrosecond);

void BM_CategoricalLoss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto batch = static_cast<Eigen::Index>(state.range(1));
  rng::RandomStream s(6);
  const auto d1 = env::agent1_state_dim(static_cast<std::size_t>(n), 3);
  const auto actions = static_cast<std::size_t>(env::action_space_size(n, 3));
  auto actor = ppo::make_categorical_actor(d1, actions, {32, 32}, {}, s);
  const nn::Matrix states = nn::Matrix::Random(static_cast<Eigen::Index>(d1), batch);
  std::vector<std::uint64_t> a(static_cast<std::size_t>(batch));
  for (auto& x : a) x = static_cast<std::uint64_t>(rng::sample_int(s, 0, static_cast<std::int64_t>(actions) - 1));
  const nn::Vector old = nn::Vector::Constant(batch, -std::log(static_cast<double>(actions)));
  const nn::Vector adv = nn::Vector::Random(batch);
  for (auto _ : state) {
    nn::MlpGradients g;
    auto loss = ppo::categorical_actor_loss(actor.net, states, a, old, adv, 0.2, 0.01, &g);
    benchmark::DoNotOptimize(loss.loss);
  }
}
BENCHMARK(BM_CategoricalLoss)->Args({5, 256})->Args({8, 256})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
