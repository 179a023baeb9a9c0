#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ucha/metrics.hpp"

namespace ucha::plots {

enum class BandKind { kMinMax, kStd };

/// Per-step mean and band across the seed rows of one algorithm.
struct Series {
  std::string algo;
  std::vector<double> step;
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// One series per algorithm (in first-appearance order) for a scalar column
/// restricted to `config_id`. NaN entries are ignored; a step whose values
/// are all NaN is dropped. Throws std::invalid_argument if the column is
/// missing.
std::vector<Series> compute_bands(const metrics::Table& table, const std::string& config_id,
                                  const std::string& column, BandKind kind);

/// Element-wise mean over seeds of a list column at each seed's final row.
/// Result is [algo][entry]; nested columns are flattened VU-major.
struct FinalValues {
  std::vector<std::string> algos;
  std::vector<std::vector<double>> values;
};
FinalValues final_list_means(const metrics::Table& table, const std::string& config_id, const std::string& column,
                             bool nested);

struct PlotSummary {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> skipped;  ///< reason for every chart not drawn
};

/// Reads <dir>/metrics_merged.csv and writes SVG charts to <dir>/plots.
PlotSummary emit_plots(const std::filesystem::path& dir);

}  // namespace ucha::plots
