#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ucha/metrics.hpp"

namespace ucha::report {

/// Summary for one (algorithm, scenario).
struct ReportRow {
  std::string algo;
  std::string config_id;
  int num_vus = 0;
  std::size_t seeds = 0;
  std::size_t window_steps = 0;   ///< evaluation steps in the final window
  double energy = 0.0;            ///< mean sum_energy over the window
  double worst_vu = 0.0;
  double reward = 0.0;            ///< mean mean_reward over the window
  std::optional<double> train_ms; ///< per optimization minibatch step
  std::optional<double> exec_ms;  ///< per environment step with inference
};

/// The final window is the last ceil(10%) of the distinct evaluation steps
/// (at least one); values are averaged over every seed row in it. `timing`
/// may be null. Rows follow first appearance in the metrics table.
std::vector<ReportRow> compute_report(const metrics::Table& table, const metrics::Table* timing);

std::string format_markdown(const std::vector<ReportRow>& rows);
std::string format_csv(const std::vector<ReportRow>& rows);

/// Reads <dir>/metrics_merged.csv (and timing.csv when present) and writes
/// <dir>/report.md and <dir>/report.csv.
std::vector<ReportRow> report_table(const std::filesystem::path& dir);

}  // namespace ucha::report
