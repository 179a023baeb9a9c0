#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ucha/matrix.hpp"
#include "ucha/metrics.hpp"
#include "ucha/plots.hpp"
#include "ucha/report.hpp"

using namespace ucha;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

config::ExperimentConfig tiny_config(const fs::path& out) {
  auto cfg = config::parse_config_text(R"({
    "env": {"num_channels": 2, "bandwidth_hz": [1.8e6, 1.8e6]},
    "ppo": {"hidden": [8], "epochs": 1, "minibatch": 32, "segment": 64},
    "run": {"algos": ["ucha"], "vu_counts": [2], "seeds": [0, 1], "total_steps": 150,
            "eval_interval": 50, "eval_episodes": 1}
  })");
  cfg.run.output_dir = out.string();
  return cfg;
}

metrics::Table synthetic_table() {
  metrics::Table t;
  t.header = {"step", "seed", "algo", "config_id", "num_vus", "mean_reward", "sum_energy", "worst_vu"};
  auto add = [&](int step, int seed, const std::string& algo, double r) {
    t.rows.push_back({std::to_string(step), std::to_string(seed), algo, "m3n5", "5", metrics::format_number(r),
                      metrics::format_number(r / 10.0), metrics::format_number(-r)});
  };
  // ucha: two seeds over 10 steps, random: one seed
  for (int s = 1; s <= 10; ++s) {
    add(s * 100, 0, "ucha", s);
    add(s * 100, 1, "ucha", s + 2.0);
    add(s * 100, 0, "random", -1.0);
  }
  return t;
}

}  // namespace

TEST(Metrics, ConfigIdAndFormatting) {
  EXPECT_EQ(metrics::config_id(3, 5), "m3n5");
  EXPECT_EQ(metrics::format_number(0.5), "0.5");
  EXPECT_EQ(metrics::format_number(std::nan("")), "nan");
  EXPECT_EQ(metrics::format_number(-INFINITY), "-inf");
  EXPECT_TRUE(std::isnan(metrics::parse_number("nan")));
  EXPECT_EQ(metrics::parse_number("1.25"), 1.25);
  EXPECT_EQ(metrics::header_line().substr(0, 9), "step,seed");
}

TEST(Metrics, RowRoundTrip) {
  metrics::MetricsRow row;
  row.step = 500;
  row.seed = 2;
  row.algo = "ucha";
  row.config_id = "m3n2";
  row.num_vus = 2;
  row.mean_reward = -3.5;
  row.train_reward = std::nan("");
  row.fps = {80.0, 70.5};
  row.energy_vu = {0.1, 0.0};
  row.local_vu = {3.0, 0.0};
  row.res_counts = {{80.0, 0.0, 0.0, 10.0}, {70.0, 1.0, 0.0, 19.0}};
  row.critic_loss = {0.25, 0.5};
  const auto dir = fs::temp_directory_path() / "ucha_metrics_rt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "m.csv") << metrics::header_line() << "\n" << metrics::format_row(row) << "\n";
  const auto t = metrics::read_table(dir / "m.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.number(0, *t.column("step")), 500.0);
  EXPECT_TRUE(std::isnan(t.number(0, *t.column("train_reward"))));
  EXPECT_EQ(t.list(0, *t.column("fps")), row.fps);
  EXPECT_EQ(t.nested(0, *t.column("res_counts")), row.res_counts);
  EXPECT_EQ(t.list(0, *t.column("critic_loss")), row.critic_loss);
  EXPECT_FALSE(t.column("nope").has_value());

  std::ofstream(dir / "ragged.csv") << "a,b\n1,2,3\n";
  EXPECT_THROW(metrics::read_table(dir / "ragged.csv"), std::exception);
}

TEST(Matrix, WorkerCountFromEnvironment) {
  setenv("UCHA_WORKERS", "3", 1);
  EXPECT_EQ(matrix::worker_count(), 3);
  setenv("UCHA_WORKERS", "0", 1);
  EXPECT_GE(matrix::worker_count(), 1);
  unsetenv("UCHA_WORKERS");
  EXPECT_GE(matrix::worker_count(), 1);
}

TEST(Matrix, EnumerationOrder) {
  auto cfg = config::parse_config_text(R"({"run": {"algos": ["ucha", "random"], "vu_counts": [5, 6], "seeds": [0, 1, 2]}})");
  const auto cells = matrix::enumerate_cells(cfg);
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(cells[0].stem(3), "ucha_m3n5_s0");
  EXPECT_EQ(cells[3].stem(3), "ucha_m3n6_s0");
  EXPECT_EQ(cells[11].stem(3), "random_m3n6_s2");
}

TEST(Matrix, SweepWritesCellsMergedAndIsDeterministic) {
  const auto base = fs::temp_directory_path() / "ucha_matrix";
  fs::remove_all(base);
  auto cfg_a = tiny_config(base / "a");
  auto cfg_b = tiny_config(base / "b");
  const auto ra = matrix::run_matrix(cfg_a, 2);
  const auto rb = matrix::run_matrix(cfg_b, 1);
  ASSERT_EQ(ra.failures(), 0u);
  ASSERT_EQ(ra.cells.size(), 2u);
  EXPECT_TRUE(fs::exists(base / "a" / "cells" / "ucha_m2n2_s0.csv"));
  EXPECT_TRUE(fs::exists(base / "a" / "cells" / "ucha_m2n2_s1.csv"));
  EXPECT_TRUE(fs::exists(base / "a" / "checkpoints" / "ucha_m2n2_s1.ckpt"));
  EXPECT_TRUE(fs::exists(base / "a" / "config.json"));
  EXPECT_TRUE(fs::exists(base / "a" / "timing.csv"));
  EXPECT_FALSE(fs::exists(base / "a" / "failed_cells.txt"));
  // 150 steps, evaluation every 50 -> 3 rows per cell
  EXPECT_EQ(ra.cells[0].rows, 3u);
  EXPECT_EQ(ra.merged_rows, 6u);
  const auto merged = metrics::read_table(ra.merged);
  EXPECT_EQ(merged.rows.size(), 6u);
  EXPECT_EQ(merged.header, metrics::columns());
  EXPECT_EQ(slurp(ra.merged), slurp(rb.merged));
  EXPECT_EQ(slurp(base / "a" / "cells" / "ucha_m2n2_s0.csv"), slurp(base / "b" / "cells" / "ucha_m2n2_s0.csv"));
}

TEST(Matrix, FailingCellIsIsolated) {
  const auto base = fs::temp_directory_path() / "ucha_matrix_fail";
  fs::remove_all(base);
  auto cfg = tiny_config(base);
  cfg.run.algos = {train::AlgorithmKind::kRandom};
  fs::create_directories(base / "cells");
  // A directory where seed 1's CSV should go makes that cell fail.
  fs::create_directories(base / "cells" / "random_m2n2_s1.csv");
  const auto r = matrix::run_matrix(cfg, 1);
  EXPECT_EQ(r.failures(), 1u);
  EXPECT_EQ(r.merged_rows, 3u);
  EXPECT_NE(slurp(base / "failed_cells.txt").find("random_m2n2_s1"), std::string::npos);
}

TEST(Plots, BandsRecomputedByHand) {
  const auto t = synthetic_table();
  const auto mm = plots::compute_bands(t, "m3n5", "mean_reward", plots::BandKind::kMinMax);
  ASSERT_EQ(mm.size(), 2u);
  EXPECT_EQ(mm[0].algo, "ucha");
  ASSERT_EQ(mm[0].step.size(), 10u);
  EXPECT_DOUBLE_EQ(mm[0].mean[0], 2.0);
  EXPECT_DOUBLE_EQ(mm[0].lo[0], 1.0);
  EXPECT_DOUBLE_EQ(mm[0].hi[0], 3.0);
  const auto sd = plots::compute_bands(t, "m3n5", "mean_reward", plots::BandKind::kStd);
  EXPECT_DOUBLE_EQ(sd[0].lo[4], 5.0);  // values 5 and 7: mean 6, population std 1
  EXPECT_DOUBLE_EQ(sd[0].hi[4], 7.0);
  // one seed: the band collapses onto the mean
  EXPECT_EQ(mm[1].lo, mm[1].mean);
  EXPECT_EQ(sd[1].hi, sd[1].mean);
  EXPECT_TRUE(plots::compute_bands(t, "m3n8", "mean_reward", plots::BandKind::kMinMax).empty());
  EXPECT_THROW(plots::compute_bands(t, "m3n5", "missing", plots::BandKind::kMinMax), std::invalid_argument);
}

TEST(Plots, EmitFromSweep) {
  const auto base = fs::temp_directory_path() / "ucha_plots";
  fs::remove_all(base);
  auto cfg = tiny_config(base);
  matrix::run_matrix(cfg, 1);
  const auto summary = plots::emit_plots(base);
  EXPECT_TRUE(fs::exists(base / "plots" / "mean_reward_m2n2_minmax.svg"));
  EXPECT_TRUE(fs::exists(base / "plots" / "mean_reward_m2n2_std.svg"));
  EXPECT_TRUE(fs::exists(base / "plots" / "resolution_m2n2.svg"));
  EXPECT_TRUE(fs::exists(base / "plots" / "critic_loss_ucha_m2n2.svg"));
  EXPECT_NE(slurp(base / "plots" / "mean_reward_m2n2_minmax.svg").find("<svg"), std::string::npos);
  EXPECT_FALSE(summary.written.empty());
}

TEST(Report, FinalWindowAndTiming) {
  const auto t = synthetic_table();
  metrics::Table timing;
  timing.header = {"algo", "config_id", "num_vus", "seed", "exec_ms", "exec_steps", "train_ms", "train_steps"};
  timing.rows = {{"ucha", "m3n5", "5", "0", "10", "100", "40", "4"},
                 {"ucha", "m3n5", "5", "1", "30", "100", "60", "6"},
                 {"random", "m3n5", "5", "0", "5", "100", "0", "0"}};
  const auto rows = report::compute_report(t, &timing);
  ASSERT_EQ(rows.size(), 2u);
  // 10 distinct steps -> window is the last one (step 1000): rewards 10 and 12
  EXPECT_EQ(rows[0].window_steps, 1u);
  EXPECT_EQ(rows[0].seeds, 2u);
  EXPECT_DOUBLE_EQ(rows[0].reward, 11.0);
  EXPECT_DOUBLE_EQ(rows[0].energy, 1.1);
  EXPECT_DOUBLE_EQ(rows[0].worst_vu, -11.0);
  ASSERT_TRUE(rows[0].train_ms.has_value());
  EXPECT_DOUBLE_EQ(*rows[0].train_ms, 10.0);
  EXPECT_DOUBLE_EQ(*rows[0].exec_ms, 0.2);
  EXPECT_FALSE(rows[1].train_ms.has_value());
  EXPECT_NE(report::format_markdown(rows).find("n/a"), std::string::npos);
  EXPECT_NE(report::format_csv(rows).find("ucha"), std::string::npos);

  const auto no_timing = report::compute_report(t, nullptr);
  EXPECT_FALSE(no_timing[0].exec_ms.has_value());
}

TEST(Report, WindowCoversTenPercent) {
  metrics::Table t;
  t.header = {"step", "seed", "algo", "config_id", "num_vus", "mean_reward", "sum_energy", "worst_vu"};
  for (int s = 1; s <= 25; ++s) t.rows.push_back({std::to_string(s), "0", "ucha", "m3n5", "5", std::to_string(s), "0", "0"});
  const auto rows = report::compute_report(t, nullptr);
  // ceil(2.5) = 3 steps: 23, 24, 25
  EXPECT_EQ(rows[0].window_steps, 3u);
  EXPECT_DOUBLE_EQ(rows[0].reward, 24.0);
}
