#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ucha/config.hpp"
#include "ucha/trainers.hpp"

namespace ucha::matrix {

struct CellSpec {
  train::AlgorithmKind algo = train::AlgorithmKind::kUcha;
  int num_vus = 0;
  std::uint64_t seed = 0;

  /// e.g. "ucha_m3n5_s0"
  [[nodiscard]] std::string stem(int num_channels) const;
};

struct CellResult {
  CellSpec spec;
  bool ok = false;
  std::string error;
  std::filesystem::path csv;
  std::size_t rows = 0;
  train::TimingStats timing;
};

struct MatrixResult {
  std::vector<CellResult> cells;  ///< in algo x vu_count x seed order
  std::filesystem::path merged;
  std::size_t merged_rows = 0;
  [[nodiscard]] std::size_t failures() const;
};

/// UCHA_WORKERS if set and positive, else the hardware thread count.
int worker_count();

/// Every (algo, vu_count, seed) cell of the config.
std::vector<CellSpec> enumerate_cells(const config::ExperimentConfig& cfg);

/// Trains one cell and writes <dir>/cells/<stem>.csv (one row per evaluation)
/// plus a checkpoint per evaluation when enabled. Exceptions propagate.
CellResult run_cell(const config::ExperimentConfig& cfg, const CellSpec& spec, const std::filesystem::path& dir);

/// Runs all cells on `workers` threads. A failing cell is logged, listed in
/// failed_cells.txt and left out of the merged file. Also writes
/// config.json, metrics_merged.csv and timing.csv under run.output_dir.
MatrixResult run_matrix(const config::ExperimentConfig& cfg, int workers = worker_count(),
                        const std::function<void(const CellResult&)>& on_done = {});

}  // namespace ucha::matrix
