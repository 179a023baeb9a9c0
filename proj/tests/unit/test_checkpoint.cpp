#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ucha/checkpoint.hpp"
#include "ucha/config.hpp"

using namespace ucha;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ucha_ckpt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool nets_equal(const nn::Mlp& a, const nn::Mlp& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (a.layers()[l].weight != b.layers()[l].weight || a.layers()[l].bias != b.layers()[l].bias ||
        a.layers()[l].activation != b.layers()[l].activation) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesPolicy) {
  for (auto kind : {train::AlgorithmKind::kUcha, train::AlgorithmKind::kIppo}) {
    auto cfg = config::parse_config_text("");
    cfg.network.hidden = {8, 8};
    cfg.env.num_channels = 2;
    cfg.env.bandwidth_hz = {1e6, 2e6};
    const auto setup = config::make_setup(cfg, kind, 3, 7);
    train::Trainer t(setup);
    t.train(64, 1000, 1, train::ActionMode::kSample, {});

    ckpt::Checkpoint c;
    c.config_json = config::dump_config(cfg);
    c.algo = kind;
    c.seed = 7;
    c.step = 64;
    c.profiles = setup.profiles;
    c.num_channels = 2;
    c.nets = t.nets();
    const auto dir = temp_dir(train::to_string(kind));
    ckpt::save(dir / "x.ckpt", c);
    const auto back = ckpt::load(dir / "x.ckpt");

    EXPECT_EQ(back.config_json, c.config_json);
    EXPECT_EQ(back.algo, kind);
    EXPECT_EQ(back.seed, 7u);
    EXPECT_EQ(back.step, 64);
    ASSERT_EQ(back.profiles.size(), 3u);
    EXPECT_EQ(back.profiles[1].cpu_hz, setup.profiles[1].cpu_hz);
    EXPECT_EQ(back.profiles[2].distance_m, setup.profiles[2].distance_m);
    EXPECT_EQ(back.nets.policy_version, t.nets().policy_version);
    EXPECT_TRUE(nets_equal(back.nets.actor1.net, t.nets().actor1.net));
    EXPECT_TRUE(nets_equal(back.nets.actor2.net, t.nets().actor2.net));
    EXPECT_EQ(back.nets.actor2.log_std, t.nets().actor2.log_std);
    EXPECT_TRUE(nets_equal(back.nets.critic1.target, t.nets().critic1.target));
    EXPECT_EQ(back.nets.critic2.has_value(), kind == train::AlgorithmKind::kIppo);

    // The reloaded policy evaluates identically.
    const auto a = train::evaluate(setup.env, setup.profiles, kind, &t.nets(), 2, rng::RandomStream(3));
    const auto b = train::evaluate(setup.env, back.profiles, kind, &back.nets, 2, rng::RandomStream(3));
    EXPECT_EQ(a.episode_rewards, b.episode_rewards);
    EXPECT_FALSE(fs::exists(dir / "x.ckpt.tmp"));
  }
}

TEST(Checkpoint, RejectsBadFiles) {
  const auto dir = temp_dir("bad");
  {
    std::ofstream f(dir / "magic.ckpt", std::ios::binary);
    f << "NOTACKPT and some more bytes";
  }
  EXPECT_THROW(ckpt::load(dir / "magic.ckpt"), std::runtime_error);
  EXPECT_THROW(ckpt::load(dir / "missing.ckpt"), std::runtime_error);

  auto cfg = config::parse_config_text("");
  cfg.network.hidden = {4};
  const auto setup = config::make_setup(cfg, train::AlgorithmKind::kUcha, 2, 1);
  train::Trainer t(setup);
  ckpt::Checkpoint c;
  c.profiles = setup.profiles;
  c.num_channels = setup.env.num_channels;
  c.nets = t.nets();
  ckpt::save(dir / "good.ckpt", c);
  const auto size = fs::file_size(dir / "good.ckpt");
  fs::copy_file(dir / "good.ckpt", dir / "short.ckpt");
  fs::resize_file(dir / "short.ckpt", size / 2);
  EXPECT_THROW(ckpt::load(dir / "short.ckpt"), std::runtime_error);
}
