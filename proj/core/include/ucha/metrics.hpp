#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ucha/trainers.hpp"

namespace ucha::metrics {

inline constexpr int kSchemaVersion = 1;

/// One evaluation event of one (algo, scenario, seed) cell.
struct MetricsRow {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::string algo;
  std::string config_id;
  int num_vus = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double worst_vu = 0.0;
  double sum_energy = 0.0;
  double train_reward = 0.0;
  std::vector<double> fps;
  std::vector<double> energy_vu;
  std::vector<double> local_vu;
  std::vector<std::vector<double>> res_counts;  ///< [vu][rung], failure rung last
  std::vector<double> critic_loss;              ///< one entry per critic head
};

/// Scenario label used in file names and the config_id column, e.g. "m3n5".
std::string config_id(int num_channels, int num_vus);

MetricsRow make_row(const train::EvalEvent& event, std::uint64_t seed, train::AlgorithmKind algo,
                    const std::string& config_id, int num_vus);

const std::vector<std::string>& columns();
std::string header_line();
std::string format_row(const MetricsRow& row);
/// "%.10g", with "nan", "inf" and "-inf" spelled out.
std::string format_number(double x);
double parse_number(const std::string& s);

/// A CSV file read by column name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;
  [[nodiscard]] double number(std::size_t row, std::size_t col) const;
  /// ';'-separated list field.
  [[nodiscard]] std::vector<double> list(std::size_t row, std::size_t col) const;
  /// ';'-separated groups of ':'-separated numbers.
  [[nodiscard]] std::vector<std::vector<double>> nested(std::size_t row, std::size_t col) const;
};

/// Plain comma-separated file without quoting; throws on ragged rows.
Table read_table(const std::filesystem::path& path);

/// Concatenates cell files under one header, in the given order. Returns the
/// number of data rows written.
std::size_t merge_files(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output);

}  // namespace ucha::metrics
