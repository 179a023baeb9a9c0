#include "ucha/matrix.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "ucha/checkpoint.hpp"
#include "ucha/metrics.hpp"

namespace ucha::matrix {

namespace fs = std::filesystem;

std::string CellSpec::stem(int num_channels) const {
  return train::to_string(algo) + "_" + metrics::config_id(num_channels, num_vus) + "_s" + std::to_string(seed);
}

std::size_t MatrixResult::failures() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.ok ? 0 : 1;
  return n;
}

int worker_count() {
  if (const char* s = std::getenv("UCHA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<int>(v);
    spdlog::warn("ignoring UCHA_WORKERS='{}' (expected a positive integer)", s);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<CellSpec> enumerate_cells(const config::ExperimentConfig& cfg) {
  std::vector<CellSpec> cells;
  for (auto algo : cfg.run.algos) {
    for (int n : cfg.run.vu_counts) {
      for (auto seed : cfg.run.seeds) cells.push_back({algo, n, seed});
    }
  }
  return cells;
}

CellResult run_cell(const config::ExperimentConfig& cfg, const CellSpec& spec, const fs::path& dir) {
  const int m = cfg.env.num_channels;
  const std::string stem = spec.stem(m);
  const std::string cfg_id = metrics::config_id(m, spec.num_vus);
  fs::create_directories(dir / "cells");
  CellResult result;
  result.spec = spec;
  result.csv = dir / "cells" / (stem + ".csv");

  train::Trainer trainer(config::make_setup(cfg, spec.algo, spec.num_vus, spec.seed));
  std::ofstream out(result.csv, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + result.csv.string());
  out << metrics::header_line() << '\n';

  const bool save = cfg.run.checkpoints && spec.algo != train::AlgorithmKind::kRandom;
  const std::string cfg_json = save ? config::dump_config(cfg) : std::string();
  if (save) fs::create_directories(dir / "checkpoints");

  trainer.train(cfg.run.total_steps, cfg.run.eval_interval, cfg.run.eval_episodes, cfg.run.eval_mode,
                [&](const train::EvalEvent& ev) {
                  out << metrics::format_row(metrics::make_row(ev, spec.seed, spec.algo, cfg_id, spec.num_vus))
                      << '\n';
                  out.flush();
                  ++result.rows;
                  if (save) {
                    ckpt::Checkpoint c;
                    c.config_json = cfg_json;
                    c.algo = spec.algo;
                    c.seed = spec.seed;
                    c.step = ev.step;
                    c.profiles = trainer.setup().profiles;
                    c.num_channels = m;
                    c.nets = trainer.nets();
                    ckpt::save(dir / "checkpoints" / (stem + ".ckpt"), c);
                  }
                });
  if (!out) throw std::runtime_error("write failed for " + result.csv.string());
  result.timing = trainer.timing();
  result.ok = true;
  return result;
}

MatrixResult run_matrix(const config::ExperimentConfig& cfg, int workers,
                        const std::function<void(const CellResult&)>& on_done) {
  const fs::path dir = cfg.run.output_dir;
  fs::create_directories(dir / "cells");
  {
    std::ofstream c(dir / "config.json", std::ios::binary | std::ios::trunc);
    c << config::dump_config(cfg);
  }
  const auto specs = enumerate_cells(cfg);
  MatrixResult res;
  res.cells.resize(specs.size());

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      CellResult r;
      try {
        r = run_cell(cfg, specs[i], dir);
      } catch (const std::exception& e) {
        r.spec = specs[i];
        r.ok = false;
        r.error = e.what();
        spdlog::error("cell {} failed: {}", specs[i].stem(cfg.env.num_channels), e.what());
      }
      std::lock_guard lock(mu);
      res.cells[i] = r;
      if (on_done) on_done(r);
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(specs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<fs::path> ok_files;
  std::ofstream timing(dir / "timing.csv", std::ios::binary | std::ios::trunc);
  timing << "algo,config_id,num_vus,seed,exec_ms,exec_steps,train_ms,train_steps\n";
  std::string failed;
  for (const auto& c : res.cells) {
    if (!c.ok) {
      failed += c.spec.stem(cfg.env.num_channels) + "\t" + c.error + "\n";
      continue;
    }
    ok_files.push_back(c.csv);
    timing << train::to_string(c.spec.algo) << ',' << metrics::config_id(cfg.env.num_channels, c.spec.num_vus) << ','
           << c.spec.num_vus << ',' << c.spec.seed << ',' << metrics::format_number(c.timing.exec_ms) << ','
           << c.timing.exec_steps << ',' << metrics::format_number(c.timing.train_ms) << ',' << c.timing.train_steps
           << '\n';
  }
  const fs::path failed_path = dir / "failed_cells.txt";
  if (failed.empty()) {
    fs::remove(failed_path);
  } else {
    std::ofstream f(failed_path, std::ios::binary | std::ios::trunc);
    f << failed;
  }
  res.merged = dir / "metrics_merged.csv";
  res.merged_rows = metrics::merge_files(ok_files, res.merged);
  return res;
}

}  // namespace ucha::matrix
