#include "ucha/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ucha::plots {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> algos_in(const metrics::Table& t, std::size_t algo_col, std::size_t cfg_col,
                                  const std::string& config_id) {
  std::vector<std::string> out;
  for (const auto& r : t.rows) {
    if (r[cfg_col] != config_id) continue;
    if (std::find(out.begin(), out.end(), r[algo_col]) == out.end()) out.push_back(r[algo_col]);
  }
  return out;
}

std::size_t need(const metrics::Table& t, const std::string& name) {
  const auto c = t.column(name);
  if (!c) throw std::invalid_argument("metrics column '" + name + "' is missing");
  return *c;
}

}  // namespace

std::vector<Series> compute_bands(const metrics::Table& table, const std::string& config_id,
                                  const std::string& column, BandKind kind) {
  const std::size_t col = need(table, column);
  const std::size_t algo_col = need(table, "algo");
  const std::size_t cfg_col = need(table, "config_id");
  const std::size_t step_col = need(table, "step");
  std::vector<Series> out;
  for (const auto& algo : algos_in(table, algo_col, cfg_col, config_id)) {
    std::map<double, std::vector<double>> by_step;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r[cfg_col] != config_id || r[algo_col] != algo) continue;
      const double v = table.number(i, col);
      auto& bucket = by_step[table.number(i, step_col)];
      if (!std::isnan(v)) bucket.push_back(v);
    }
    Series s;
    s.algo = algo;
    for (const auto& [step, vals] : by_step) {
      if (vals.empty()) continue;
      double sum = 0.0;
      for (double v : vals) sum += v;
      const double mean = sum / static_cast<double>(vals.size());
      double lo = 0.0;
      double hi = 0.0;
      if (kind == BandKind::kMinMax) {
        lo = *std::min_element(vals.begin(), vals.end());
        hi = *std::max_element(vals.begin(), vals.end());
      } else {
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(vals.size()));
        lo = mean - sd;
        hi = mean + sd;
      }
      s.step.push_back(step);
      s.mean.push_back(mean);
      s.lo.push_back(lo);
      s.hi.push_back(hi);
    }
    out.push_back(std::move(s));
  }
  return out;
}

FinalValues final_list_means(const metrics::Table& table, const std::string& config_id, const std::string& column,
                             bool nested) {
  const std::size_t col = need(table, column);
  const std::size_t algo_col = need(table, "algo");
  const std::size_t cfg_col = need(table, "config_id");
  const std::size_t step_col = need(table, "step");
  const std::size_t seed_col = need(table, "seed");
  FinalValues out;
  for (const auto& algo : algos_in(table, algo_col, cfg_col, config_id)) {
    // Final row of each seed.
    std::map<std::string, std::pair<double, std::size_t>> last;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r[cfg_col] != config_id || r[algo_col] != algo) continue;
      const double step = table.number(i, step_col);
      auto it = last.find(r[seed_col]);
      if (it == last.end() || step >= it->second.first) last[r[seed_col]] = {step, i};
    }
    std::vector<double> acc;
    for (const auto& [seed, entry] : last) {
      std::vector<double> v;
      if (nested) {
        for (const auto& g : table.nested(entry.second, col)) v.insert(v.end(), g.begin(), g.end());
      } else {
        v = table.list(entry.second, col);
      }
      if (acc.empty()) acc.assign(v.size(), 0.0);
      if (v.size() != acc.size()) throw std::runtime_error("column '" + column + "' changes length across seeds");
      for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
    }
    for (auto& a : acc) a /= static_cast<double>(std::max<std::size_t>(1, last.size()));
    out.algos.push_back(algo);
    out.values.push_back(std::move(acc));
  }
  return out;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      default: o += c;
    }
  }
  return o;
}

/// "Nice" tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(v);
  return out;
}

/// Plot area with data-to-pixel mapping, axes and a legend.
class Chart {
 public:
  Chart(std::string title, std::string xlabel, std::string ylabel) :
      title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void set_range(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) {
      x0 -= 0.5;
      x1 += 0.5;
    }
    if (!(y1 > y0)) {
      const double pad = std::max(1e-9, std::abs(y0) * 0.05 + 0.5);
      y0 -= pad;
      y1 += pad;
    } else {
      const double pad = (y1 - y0) * 0.05;
      y0 -= pad;
      y1 += pad;
    }
    x0_ = x0;
    x1_ = x1;
    y0_ = y0;
    y1_ = y1;
  }

  [[nodiscard]] double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * kPlotW; }
  [[nodiscard]] double py(double y) const { return kTop + (y1_ - y) / (y1_ - y0_) * kPlotH; }

  void raw(const std::string& s) { body_ += s; }
  void legend(const std::string& name, const char* col) { legend_.emplace_back(name, col); }

  void axes(bool numeric_x = true) {
    std::string a;
    a += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW) + "\" height=\"" +
         num(kPlotH) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : ticks(y0_, y1_)) {
      a += "<line x1=\"" + num(kLeft - 4) + "\" x2=\"" + num(kLeft + kPlotW) + "\" y1=\"" + num(py(t)) + "\" y2=\"" +
           num(py(t)) + "\" stroke=\"#ddd\"/>\n";
      a += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(t) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + label(t) + "</text>\n";
    }
    if (numeric_x) {
      for (double t : ticks(x0_, x1_)) {
        a += "<line x1=\"" + num(px(t)) + "\" x2=\"" + num(px(t)) + "\" y1=\"" + num(kTop + kPlotH) + "\" y2=\"" +
             num(kTop + kPlotH + 4) + "\" stroke=\"#333\"/>\n";
        a += "<text x=\"" + num(px(t)) + "\" y=\"" + num(kTop + kPlotH + 17) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + label(t) + "</text>\n";
      }
    }
    axes_ = a;
  }

  [[nodiscard]] std::string svg() const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" << escape(title_)
      << "</text>\n";
    o << axes_ << body_;
    o << "<text x=\"" << num(kLeft + kPlotW / 2) << "\" y=\"" << kHeight - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel_) << "</text>\n";
    o << "<text transform=\"translate(16," << num(kTop + kPlotH / 2)
      << ") rotate(-90)\" font-size=\"12\" text-anchor=\"middle\">" << escape(ylabel_) << "</text>\n";
    double y = kTop + 10;
    for (const auto& [name, col] : legend_) {
      o << "<rect x=\"" << num(kLeft + kPlotW + 12) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
        << col << "\"/>\n";
      o << "<text x=\"" << num(kLeft + kPlotW + 30) << "\" y=\"" << num(y + 1) << "\" font-size=\"12\">"
        << escape(name) << "</text>\n";
      y += 18;
    }
    o << "</svg>\n";
    return o.str();
  }

  static constexpr double kWidth = 760;
  static constexpr double kHeight = 440;
  static constexpr double kLeft = 70;
  static constexpr double kTop = 36;
  static constexpr double kPlotW = 540;
  static constexpr double kPlotH = 350;

 private:
  std::string title_, xlabel_, ylabel_, axes_, body_;
  std::vector<std::pair<std::string, const char*>> legend_;
  double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
};

void write(const fs::path& path, const std::string& text, PlotSummary& summary) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  summary.written.push_back(path);
}

std::string polyline(const Chart& c, const std::vector<double>& x, const std::vector<double>& y, const char* col) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts += num(c.px(x[i])) + "," + num(c.py(y[i])) + " ";
  return "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.8\"/>\n";
}

std::string band(const Chart& c, const Series& s, const char* col) {
  std::string pts;
  for (std::size_t i = 0; i < s.step.size(); ++i) pts += num(c.px(s.step[i])) + "," + num(c.py(s.hi[i])) + " ";
  for (std::size_t i = s.step.size(); i-- > 0;) pts += num(c.px(s.step[i])) + "," + num(c.py(s.lo[i])) + " ";
  return "<polygon points=\"" + pts + "\" fill=\"" + col + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
}

std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& ylabel) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.step.size(); ++i) {
      x0 = std::min(x0, s.step[i]);
      x1 = std::max(x1, s.step[i]);
      y0 = std::min(y0, s.lo[i]);
      y1 = std::max(y1, s.hi[i]);
    }
  }
  Chart c(title, "training step", ylabel);
  c.set_range(x0, x1, y0, y1);
  c.axes();
  for (std::size_t k = 0; k < series.size(); ++k) {
    c.raw(band(c, series[k], color(k)));
    c.raw(polyline(c, series[k].step, series[k].mean, color(k)));
    c.legend(series[k].algo, color(k));
  }
  return c.svg();
}

/// Grouped bars: one group per VU, one bar per algorithm; each bar is a stack
/// of `parts` segments.
std::string bar_chart(const FinalValues& fv, std::size_t parts, const std::vector<std::string>& part_names,
                      const std::string& title, const std::string& ylabel) {
  const std::size_t n_algos = fv.algos.size();
  std::size_t n_vus = 0;
  double ymax = 0.0;
  for (const auto& v : fv.values) {
    n_vus = std::max(n_vus, v.size() / parts);
    for (std::size_t g = 0; g * parts < v.size(); ++g) {
      double s = 0.0;
      for (std::size_t p = 0; p < parts; ++p) s += v[g * parts + p];
      ymax = std::max(ymax, s);
    }
  }
  Chart c(title, "VU", ylabel);
  c.set_range(0.0, static_cast<double>(std::max<std::size_t>(1, n_vus)), 0.0, ymax > 0 ? ymax : 1.0);
  c.axes(false);
  const double group_w = Chart::kPlotW / static_cast<double>(std::max<std::size_t>(1, n_vus));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, n_algos));
  for (std::size_t g = 0; g < n_vus; ++g) {
    c.raw("<text x=\"" + num(Chart::kLeft + group_w * (g + 0.5)) + "\" y=\"" +
          num(Chart::kTop + Chart::kPlotH + 17) + "\" font-size=\"11\" text-anchor=\"middle\">" +
          std::to_string(g + 1) + "</text>\n");
    for (std::size_t a = 0; a < n_algos; ++a) {
      const auto& v = fv.values[a];
      if ((g + 1) * parts > v.size()) continue;
      const double x = Chart::kLeft + group_w * g + group_w * 0.1 + bar_w * a;
      double base = 0.0;
      for (std::size_t p = 0; p < parts; ++p) {
        const double h = v[g * parts + p];
        const char* col = parts == 1 ? color(a) : color(p);
        c.raw("<rect x=\"" + num(x) + "\" y=\"" + num(c.py(base + h)) + "\" width=\"" + num(bar_w * 0.92) +
              "\" height=\"" + num(c.py(base) - c.py(base + h)) + "\" fill=\"" + col + "\" stroke=\"white\"" +
              (parts > 1 ? " fill-opacity=\"" + num(1.0 - 0.5 * static_cast<double>(a) / std::max<std::size_t>(1, n_algos)) + "\"" : std::string()) +
              "><title>" + escape(fv.algos[a]) + "</title></rect>\n");
        base += h;
      }
    }
  }
  if (parts == 1) {
    for (std::size_t a = 0; a < n_algos; ++a) c.legend(fv.algos[a], color(a));
  } else {
    for (std::size_t p = 0; p < parts; ++p) c.legend(p < part_names.size() ? part_names[p] : "part", color(p));
    std::string order;
    for (const auto& a : fv.algos) order += (order.empty() ? "" : ", ") + a;
    c.raw("<text x=\"" + num(Chart::kLeft) + "\" y=\"" + num(Chart::kTop - 4) +
          "\" font-size=\"10\">bars per VU, left to right (fading): " + escape(order) + "</text>\n");
  }
  return c.svg();
}

std::vector<std::string> configs_in(const metrics::Table& t) {
  std::vector<std::string> out;
  const auto c = t.column("config_id");
  if (!c) return out;
  for (const auto& r : t.rows) {
    if (std::find(out.begin(), out.end(), r[*c]) == out.end()) out.push_back(r[*c]);
  }
  return out;
}

}  // namespace

PlotSummary emit_plots(const fs::path& dir) {
  const fs::path merged = dir / "metrics_merged.csv";
  if (!fs::exists(merged)) throw std::runtime_error("no metrics_merged.csv in " + dir.string());
  const metrics::Table table = metrics::read_table(merged);
  const fs::path out = dir / "plots";
  fs::create_directories(out);
  PlotSummary summary;
  auto skip = [&](const std::string& why) {
    spdlog::warn("plot skipped: {}", why);
    summary.skipped.push_back(why);
  };

  const std::vector<std::pair<std::string, std::string>> scalar{{"mean_reward", "evaluation reward"},
                                                                {"train_reward", "training episode reward"},
                                                                {"worst_vu", "worst VU frames"},
                                                                {"sum_energy", "sum local energy (J)"}};
  for (const auto& cfg : configs_in(table)) {
    for (const auto& [col, name] : scalar) {
      if (!table.column(col)) {
        skip("column '" + col + "' missing");
        continue;
      }
      for (auto kind : {BandKind::kMinMax, BandKind::kStd}) {
        const auto series = compute_bands(table, cfg, col, kind);
        const std::string suffix = kind == BandKind::kMinMax ? "minmax" : "std";
        if (std::all_of(series.begin(), series.end(), [](const Series& s) { return s.step.empty(); })) {
          skip(col + " for " + cfg + " has no finite values");
          break;
        }
        write(out / (col + "_" + cfg + "_" + suffix + ".svg"),
              line_chart(series, name + " (" + cfg + ", " + (kind == BandKind::kMinMax ? "min-max" : "mean +- std") +
                                     " over seeds)",
                         name),
              summary);
      }
    }

    if (table.column("res_counts")) {
      const auto fv = final_list_means(table, cfg, "res_counts", true);
      // Rung count per VU from the first non-empty row.
      std::size_t parts = 0;
      const auto rc = *table.column("res_counts");
      for (std::size_t i = 0; i < table.rows.size() && parts == 0; ++i) {
        const auto n = table.nested(i, rc);
        if (!n.empty()) parts = n.front().size();
      }
      if (parts == 0) {
        skip("res_counts for " + cfg + " is empty");
      } else {
        std::vector<std::string> names;
        for (std::size_t p = 0; p + 1 < parts; ++p) names.push_back("rung " + std::to_string(p + 1));
        names.push_back("failed");
        write(out / ("resolution_" + cfg + ".svg"),
              bar_chart(fv, parts, names, "received resolutions per VU, final evaluation (" + cfg + ")",
                        "frames per episode"),
              summary);
      }
    } else {
      skip("column 'res_counts' missing");
    }

    for (const auto& [col, name] : std::vector<std::pair<std::string, std::string>>{
             {"energy_vu", "local energy per VU (J)"}, {"local_vu", "local generations per VU"}, {"fps", "successful FPS per VU"}}) {
      if (!table.column(col)) {
        skip("column '" + col + "' missing");
        continue;
      }
      write(out / (col + "_" + cfg + ".svg"),
            bar_chart(final_list_means(table, cfg, col, false), 1, {}, name + ", final evaluation (" + cfg + ")", name),
            summary);
    }

    if (!table.column("critic_loss")) {
      skip("column 'critic_loss' missing");
      continue;
    }
    const auto cl = *table.column("critic_loss");
    const auto algo_col = *table.column("algo");
    const auto cfg_col = *table.column("config_id");
    const auto step_col = *table.column("step");
    for (const auto& algo : algos_in(table, algo_col, cfg_col, cfg)) {
      std::map<double, std::vector<std::vector<double>>> by_step;
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i][cfg_col] != cfg || table.rows[i][algo_col] != algo) continue;
        auto v = table.list(i, cl);
        if (v.empty()) continue;
        by_step[table.number(i, step_col)].push_back(std::move(v));
      }
      if (by_step.empty()) continue;  // no critic (RANDOM)
      const std::size_t heads = by_step.begin()->second.front().size();
      std::vector<Series> series(heads);
      for (std::size_t h = 0; h < heads; ++h) series[h].algo = heads == 1 ? "critic" : "VU " + std::to_string(h + 1);
      for (const auto& [step, rows] : by_step) {
        for (std::size_t h = 0; h < heads; ++h) {
          double s = 0.0;
          int n = 0;
          for (const auto& r : rows) {
            if (h < r.size() && !std::isnan(r[h])) {
              s += r[h];
              ++n;
            }
          }
          if (n == 0) continue;
          series[h].step.push_back(step);
          series[h].mean.push_back(s / n);
          series[h].lo.push_back(s / n);
          series[h].hi.push_back(s / n);
        }
      }
      if (std::all_of(series.begin(), series.end(), [](const Series& s) { return s.step.empty(); })) {
        skip("critic_loss for " + algo + "/" + cfg + " has no finite values");
        continue;
      }
      write(out / ("critic_loss_" + algo + "_" + cfg + ".svg"),
            line_chart(series, "critic loss per head, " + algo + " (" + cfg + ", mean over seeds)", "critic loss"),
            summary);
    }
  }
  return summary;
}

}  // namespace ucha::plots
