#include "ucha/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ucha::report {

namespace fs = std::filesystem;

namespace {

std::size_t need(const metrics::Table& t, const std::string& name) {
  const auto c = t.column(name);
  if (!c) throw std::invalid_argument("column '" + name + "' is missing");
  return *c;
}

std::string fmt(double x, int prec) {
  if (std::isnan(x)) return "nan";
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(prec);
  o << x;
  return o.str();
}

std::string opt(const std::optional<double>& x) { return x ? fmt(*x, 3) : "n/a"; }

}  // namespace

std::vector<ReportRow> compute_report(const metrics::Table& table, const metrics::Table* timing) {
  const auto algo_c = need(table, "algo");
  const auto cfg_c = need(table, "config_id");
  const auto step_c = need(table, "step");
  const auto seed_c = need(table, "seed");
  const auto nvu_c = need(table, "num_vus");
  const auto rew_c = need(table, "mean_reward");
  const auto worst_c = need(table, "worst_vu");
  const auto energy_c = need(table, "sum_energy");

  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : table.rows) {
    const std::pair<std::string, std::string> k{r[algo_c], r[cfg_c]};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }

  std::vector<ReportRow> out;
  for (const auto& [algo, cfg] : keys) {
    std::set<double> steps;
    std::set<std::string> seeds;
    ReportRow row;
    row.algo = algo;
    row.config_id = cfg;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r[algo_c] != algo || r[cfg_c] != cfg) continue;
      steps.insert(table.number(i, step_c));
      seeds.insert(r[seed_c]);
      row.num_vus = static_cast<int>(table.number(i, nvu_c));
    }
    const std::size_t k = std::max<std::size_t>(1, (steps.size() + 9) / 10);
    const double first = *std::next(steps.begin(), static_cast<std::ptrdiff_t>(steps.size() - k));
    double rew = 0.0, worst = 0.0, energy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r[algo_c] != algo || r[cfg_c] != cfg || table.number(i, step_c) < first) continue;
      rew += table.number(i, rew_c);
      worst += table.number(i, worst_c);
      energy += table.number(i, energy_c);
      ++n;
    }
    row.seeds = seeds.size();
    row.window_steps = k;
    row.reward = rew / static_cast<double>(n);
    row.worst_vu = worst / static_cast<double>(n);
    row.energy = energy / static_cast<double>(n);

    if (timing != nullptr) {
      const auto ta = need(*timing, "algo");
      const auto tc = need(*timing, "config_id");
      const auto em = need(*timing, "exec_ms");
      const auto es = need(*timing, "exec_steps");
      const auto tm = need(*timing, "train_ms");
      const auto ts = need(*timing, "train_steps");
      double exec_ms = 0.0, exec_steps = 0.0, train_ms = 0.0, train_steps = 0.0;
      for (std::size_t i = 0; i < timing->rows.size(); ++i) {
        if (timing->rows[i][ta] != algo || timing->rows[i][tc] != cfg) continue;
        exec_ms += timing->number(i, em);
        exec_steps += timing->number(i, es);
        train_ms += timing->number(i, tm);
        train_steps += timing->number(i, ts);
      }
      if (exec_steps > 0) row.exec_ms = exec_ms / exec_steps;
      if (train_steps > 0) row.train_ms = train_ms / train_steps;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string format_markdown(const std::vector<ReportRow>& rows) {
  std::ostringstream o;
  o << "| algo | scenario | VUs | seeds | energy (J) | worst VU | reward | train step (ms) | exec step (ms) |\n";
  o << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    o << "| " << r.algo << " | " << r.config_id << " | " << r.num_vus << " | " << r.seeds << " | "
      << fmt(r.energy, 4) << " | " << fmt(r.worst_vu, 2) << " | " << fmt(r.reward, 3) << " | " << opt(r.train_ms)
      << " | " << opt(r.exec_ms) << " |\n";
  }
  return o.str();
}

std::string format_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream o;
  o << "algo,config_id,num_vus,seeds,window_steps,energy,worst_vu,reward,train_ms,exec_ms\n";
  for (const auto& r : rows) {
    o << r.algo << ',' << r.config_id << ',' << r.num_vus << ',' << r.seeds << ',' << r.window_steps << ','
      << metrics::format_number(r.energy) << ',' << metrics::format_number(r.worst_vu) << ','
      << metrics::format_number(r.reward) << ',' << (r.train_ms ? metrics::format_number(*r.train_ms) : "n/a") << ','
      << (r.exec_ms ? metrics::format_number(*r.exec_ms) : "n/a") << '\n';
  }
  return o.str();
}

std::vector<ReportRow> report_table(const fs::path& dir) {
  const fs::path merged = dir / "metrics_merged.csv";
  if (!fs::exists(merged)) throw std::runtime_error("no metrics_merged.csv in " + dir.string());
  const auto table = metrics::read_table(merged);
  std::optional<metrics::Table> timing;
  if (fs::exists(dir / "timing.csv")) timing = metrics::read_table(dir / "timing.csv");
  auto rows = compute_report(table, timing ? &*timing : nullptr);
  std::ofstream(dir / "report.md", std::ios::binary | std::ios::trunc) << format_markdown(rows);
  std::ofstream(dir / "report.csv", std::ios::binary | std::ios::trunc) << format_csv(rows);
  return rows;
}

}  // namespace ucha::report
