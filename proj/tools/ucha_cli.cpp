// ucha: train, sweep, evaluate, plot and summarize experiment runs.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ucha/checkpoint.hpp"
#include "ucha/config.hpp"
#include "ucha/matrix.hpp"
#include "ucha/plots.hpp"
#include "ucha/report.hpp"

namespace fs = std::filesystem;
using namespace ucha;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file (empty file = defaults)")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a config value, e.g. --set ppo.epochs=4");
  cmd->add_option("--out", o.out, "Output directory (overrides run.output_dir)");
  cmd->add_option("--workers", o.workers, "Parallel cells (default: UCHA_WORKERS or hardware threads)");
}

config::ExperimentConfig load(const CommonOptions& o, std::vector<std::string> extra) {
  auto overrides = o.overrides;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  if (!o.out.empty()) overrides.push_back("run.output_dir=\"" + o.out + "\"");
  return config::load_with_overrides(o.config, overrides);
}

int run(const config::ExperimentConfig& cfg, int workers) {
  const int w = workers > 0 ? workers : matrix::worker_count();
  const auto cells = matrix::enumerate_cells(cfg);
  spdlog::info("{} cell(s), {} worker(s), output in {}", cells.size(), w, cfg.run.output_dir);
  const auto res = matrix::run_matrix(cfg, w, [&](const matrix::CellResult& r) {
    if (r.ok) {
      spdlog::info("done {} ({} rows)", r.spec.stem(cfg.env.num_channels), r.rows);
    }
  });
  spdlog::info("merged {} rows into {}", res.merged_rows, res.merged.string());
  if (res.failures() > 0) {
    spdlog::error("{} cell(s) failed, see failed_cells.txt", res.failures());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user VR resource allocation: UCHA, HAPPO, IPPO and random baselines"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  std::string algo;
  std::uint64_t seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train one algorithm with one seed on every configured VU count");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--algo", algo, "ucha|happo|ippo|random")->required();
  train_cmd->add_option("--seed", seed, "Global seed")->required();

  CommonOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every algo x VU count x seed cell of the config");
  add_common(sweep_cmd, sweep_opts);

  std::string ckpt_path;
  int episodes = 5;
  std::string mode = "sample";
  std::uint64_t eval_seed = 0;
  bool per_episode = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with early termination disabled");
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--mode", mode, "sample|greedy");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation stream seed");
  eval_cmd->add_flag("--per-episode", per_episode, "Include per-episode rewards in the output");

  std::string plot_dir;
  auto* plot_cmd = app.add_subcommand("plot", "Write SVG charts for a run directory");
  plot_cmd->add_option("--dir", plot_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Write the summary table for a run directory");
  report_cmd->add_option("--dir", report_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CommonOptions show_opts;
  auto* show_cmd = app.add_subcommand("config", "Print the fully resolved configuration");
  add_common(show_cmd, show_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      (void)train::parse_algorithm(algo);
      const auto cfg = load(train_opts, {"run.algos=[\"" + algo + "\"]", "run.seeds=[" + std::to_string(seed) + "]"});
      return run(cfg, train_opts.workers);
    }
    if (*sweep_cmd) return run(load(sweep_opts, {}), sweep_opts.workers);
    if (*show_cmd) {
      std::cout << config::dump_config(load(show_opts, {}));
      return 0;
    }
    if (*eval_cmd) {
      const auto ck = ckpt::load(ckpt_path);
      const auto cfg = config::parse_config_text(ck.config_json);
      const auto rep = train::evaluate(cfg.env, ck.profiles, ck.algo, &ck.nets, episodes,
                                       rng::RandomStream(eval_seed).substream("cli-eval"),
                                       config::parse_action_mode(mode));
      nlohmann::json j = {{"algo", train::to_string(ck.algo)},
                          {"seed", ck.seed},
                          {"step", ck.step},
                          {"episodes", rep.episodes},
                          {"episode_length", rep.episode_length},
                          {"mean_reward", rep.mean_reward},
                          {"reward_std", rep.reward_std},
                          {"worst_vu", rep.worst_vu},
                          {"sum_energy", rep.sum_energy},
                          {"fps", rep.fps},
                          {"energy_vu", rep.energy_per_vu},
                          {"local_vu", rep.local_per_vu},
                          {"res_counts", rep.rung_counts}};
      if (per_episode) j["episode_rewards"] = rep.episode_rewards;
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*plot_cmd) {
      const auto s = plots::emit_plots(plot_dir);
      for (const auto& p : s.written) std::cout << p.string() << '\n';
      return 0;
    }
    if (*report_cmd) {
      const auto rows = report::report_table(report_dir);
      std::cout << report::format_markdown(rows);
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
