#include "ucha/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ucha::metrics {

std::string config_id(int num_channels, int num_vus) {
  return "m" + std::to_string(num_channels) + "n" + std::to_string(num_vus);
}

MetricsRow make_row(const train::EvalEvent& event, std::uint64_t seed, train::AlgorithmKind algo,
                    const std::string& cfg_id, int num_vus) {
  const auto& r = event.report;
  MetricsRow row;
  row.step = event.step;
  row.seed = seed;
  row.algo = train::to_string(algo);
  row.config_id = cfg_id;
  row.num_vus = num_vus;
  row.mean_reward = r.mean_reward;
  row.reward_std = r.reward_std;
  row.worst_vu = r.worst_vu;
  row.sum_energy = r.sum_energy;
  row.train_reward = event.train_reward;
  row.fps = r.fps;
  row.energy_vu = r.energy_per_vu;
  row.local_vu = r.local_per_vu;
  row.res_counts = r.rung_counts;
  row.critic_loss.assign(event.critic_loss.data(), event.critic_loss.data() + event.critic_loss.size());
  return row;
}

const std::vector<std::string>& columns() {
  static const std::vector<std::string> cols{
      "step",      "seed",      "algo",     "config_id", "num_vus",    "mean_reward", "reward_std", "worst_vu",
      "sum_energy", "train_reward", "fps", "energy_vu", "local_vu", "res_counts", "critic_loss"};
  return cols;
}

std::string header_line() {
  std::string s;
  for (const auto& c : columns()) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

namespace {

std::string join(const std::vector<double>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += sep;
    s += format_number(v[i]);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_row(const MetricsRow& r) {
  std::string nested;
  for (std::size_t n = 0; n < r.res_counts.size(); ++n) {
    if (n > 0) nested += ';';
    nested += join(r.res_counts[n], ':');
  }
  std::ostringstream os;
  os << r.step << ',' << r.seed << ',' << r.algo << ',' << r.config_id << ',' << r.num_vus << ','
     << format_number(r.mean_reward) << ',' << format_number(r.reward_std) << ',' << format_number(r.worst_vu) << ','
     << format_number(r.sum_energy) << ',' << format_number(r.train_reward) << ',' << join(r.fps, ';') << ','
     << join(r.energy_vu, ';') << ',' << join(r.local_vu, ';') << ',' << nested << ',' << join(r.critic_loss, ';');
  return os.str();
}

std::optional<std::size_t> Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

double Table::number(std::size_t row, std::size_t col) const { return parse_number(rows.at(row).at(col)); }

std::vector<double> Table::list(std::size_t row, std::size_t col) const {
  std::vector<double> out;
  for (const auto& s : split(rows.at(row).at(col), ';')) out.push_back(parse_number(s));
  return out;
}

std::vector<std::vector<double>> Table::nested(std::size_t row, std::size_t col) const {
  std::vector<std::vector<double>> out;
  for (const auto& group : split(rows.at(row).at(col), ';')) {
    std::vector<double> g;
    for (const auto& s : split(group, ':')) g.push_back(parse_number(s));
    out.push_back(std::move(g));
  }
  return out;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

std::size_t merge_files(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output) {
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output.string());
  out << header_line() << '\n';
  std::size_t count = 0;
  for (const auto& p : inputs) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::string line;
    std::getline(in, line);
    if (line != header_line()) throw std::runtime_error(p.string() + ": unexpected metrics header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      out << line << '\n';
      ++count;
    }
  }
  return count;
}

}  // namespace ucha::metrics
