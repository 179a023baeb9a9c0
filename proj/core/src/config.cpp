#include "ucha/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ucha::config {

using nlohmann::json;

std::string to_string(train::ActionMode mode) { return mode == train::ActionMode::kSample ? "sample" : "greedy"; }

train::ActionMode parse_action_mode(const std::string& s) {
  if (s == "sample") return train::ActionMode::kSample;
  if (s == "greedy") return train::ActionMode::kGreedy;
  throw std::invalid_argument("unknown eval mode '" + s + "' (expected sample|greedy)");
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

void read(const json& v, const std::string& path, double& out) {
  if (!v.is_number()) fail(path, "expected a number");
  out = v.get<double>();
}

void read(const json& v, const std::string& path, bool& out) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  out = v.get<bool>();
}

void read(const json& v, const std::string& path, std::string& out) {
  if (!v.is_string()) fail(path, "expected a string");
  out = v.get<std::string>();
}

template <typename I>
  requires std::is_integral_v<I>
void read(const json& v, const std::string& path, I& out) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  if constexpr (std::is_unsigned_v<I>) {
    if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) fail(path, "expected a non-negative integer");
  }
  out = v.get<I>();
}

template <typename T>
void read(const json& v, const std::string& path, std::vector<T>& out) {
  if (!v.is_array()) fail(path, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    T x{};
    read(v[i], path + "[" + std::to_string(i) + "]", x);
    out.push_back(std::move(x));
  }
}

template <typename T>
void read(const json& v, const std::string& path, std::array<T, 2>& out) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected a two-element array [lo, hi]");
  read(v[0], path + "[0]", out[0]);
  read(v[1], path + "[1]", out[1]);
}

/// Object reader that remembers which keys were consumed.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read(*it, full(key), out);
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[nodiscard]] std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) fail(full(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& empty_object() {
  static const json e = json::object();
  return e;
}

const json& sub(Node& n, const std::string& key) {
  const json* p = n.raw(key);
  return p == nullptr ? empty_object() : *p;
}

/// Runs a validate() and prefixes its message with the section path.
template <typename F>
void checked(const std::string& section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    // Messages already naming a key path are kept as is.
    if (msg.rfind(section, 0) == 0) throw;
    fail(section, msg);
  }
}

void parse_env(const json& j, env::EnvConfig& e) {
  Node n(j, "env");
  n.get("slots_per_second", e.slots_per_second);
  n.get("num_channels", e.num_channels);
  n.get("bandwidth_hz", e.bandwidth_hz);
  n.get("noise_psd", e.noise_psd);
  n.get("p_max", e.p_max);
  n.get("server_hz", e.server_hz);
  n.get("eta", e.eta);
  if (const json* r = n.raw("resolutions")) {
    if (!r->is_array()) fail("env.resolutions", "expected an array");
    e.resolutions.clear();
    for (std::size_t i = 0; i < r->size(); ++i) {
      Node rn((*r)[i], "env.resolutions[" + std::to_string(i) + "]");
      env::Resolution res;
      rn.get("label", res.label);
      rn.get("width", res.width);
      rn.get("height", res.height);
      rn.finish();
      e.resolutions.push_back(res);
    }
  }
  n.get("bits_per_pixel", e.bits_per_pixel);
  n.get("eyes_per_frame", e.eyes_per_frame);
  n.get("compression_range", e.compression_range);
  n.get("cycles_per_bit_range", e.cycles_per_bit_range);
  {
    Node rn(sub(n, "rewards"), "env.rewards");
    rn.get("resolution", e.rewards.resolution);
    rn.get("fail", e.rewards.fail);
    rn.get("energy", e.rewards.energy);
    rn.get("worst", e.rewards.worst);
    rn.get("terminate", e.rewards.terminate);
    rn.finish();
  }
  {
    Node fn(sub(n, "fading"), "env.fading");
    fn.get("beta0", e.fading.beta0);
    fn.get("alpha", e.fading.alpha);
    if (const json* k = fn.raw("rician_k")) {
      // "inf" selects the pure line-of-sight channel.
      if (k->is_string() && k->get<std::string>() == "inf") {
        e.fading.rician_k = std::numeric_limits<double>::infinity();
      } else {
        read(*k, "env.fading.rician_k", e.fading.rician_k);
      }
    }
    fn.finish();
  }
  n.get("area_side_m", e.area_side_m);
  n.get("early_termination", e.early_termination);
  if (const json* lb = n.raw("local_budget")) {
    std::string text;
    read(*lb, "env.local_budget", text);
    checked("env.local_budget", [&] { e.local_budget = env::parse_local_budget(text); });
  }
  n.finish();
}

void parse_vus(const json& j, VuSection& v) {
  Node n(j, "vus");
  n.get("cpu_ghz", v.sampling.cpu_ghz);
  n.get("tau_f", v.sampling.tau_f);
  if (const json* o = n.raw("overrides")) {
    if (!o->is_array()) fail("vus.overrides", "expected an array");
    v.overrides.clear();
    for (std::size_t i = 0; i < o->size(); ++i) {
      const std::string path = "vus.overrides[" + std::to_string(i) + "]";
      Node on((*o)[i], path);
      env::VuOverride ov;
      if (const json* x = on.raw("cpu_ghz")) read(*x, path + ".cpu_ghz", ov.cpu_ghz.emplace());
      if (const json* x = on.raw("battery")) {
        std::string label;
        read(*x, path + ".battery", label);
        checked(path + ".battery", [&] { ov.battery = env::parse_battery(label); });
      }
      if (const json* x = on.raw("tau_f")) read(*x, path + ".tau_f", ov.tau_f.emplace());
      if (const json* x = on.raw("distance_m")) read(*x, path + ".distance_m", ov.distance_m.emplace());
      on.finish();
      v.overrides.push_back(ov);
    }
  }
  n.finish();
}

void parse_ppo(const json& j, ppo::PpoHyper& p, train::NetworkConfig& net) {
  Node n(j, "ppo");
  n.get("gamma", p.gamma);
  n.get("lambda", p.lambda);
  n.get("clip", p.clip);
  n.get("epochs", p.epochs);
  n.get("minibatch", p.minibatch);
  n.get("segment", p.segment);
  n.get("target_sync", p.target_sync);
  if (const json* x = n.raw("value_target")) {
    std::string s;
    read(*x, "ppo.value_target", s);
    checked("ppo.value_target", [&] { p.value_target = ppo::parse_value_target_mode(s); });
  }
  n.get("entropy_discrete", p.entropy_discrete);
  n.get("entropy_continuous", p.entropy_continuous);
  n.get("normalize_advantages", p.normalize_advantages);
  n.get("actor_lr", p.actor_adam.lr);
  n.get("critic_lr", p.critic_adam.lr);
  double clip_norm = p.actor_adam.max_grad_norm;
  n.get("max_grad_norm", clip_norm);
  p.actor_adam.max_grad_norm = clip_norm;
  p.critic_adam.max_grad_norm = clip_norm;
  n.get("hidden", net.hidden);
  n.get("initial_log_std", net.initial_log_std);
  n.finish();
}

void parse_run(const json& j, RunSection& r) {
  Node n(j, "run");
  if (const json* a = n.raw("algos")) {
    std::vector<std::string> names;
    read(*a, "run.algos", names);
    r.algos.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      checked("run.algos[" + std::to_string(i) + "]", [&] { r.algos.push_back(train::parse_algorithm(names[i])); });
    }
  }
  n.get("vu_counts", r.vu_counts);
  n.get("seeds", r.seeds);
  n.get("total_steps", r.total_steps);
  n.get("eval_interval", r.eval_interval);
  n.get("eval_episodes", r.eval_episodes);
  if (const json* x = n.raw("eval_mode")) {
    std::string s;
    read(*x, "run.eval_mode", s);
    checked("run.eval_mode", [&] { r.eval_mode = parse_action_mode(s); });
  }
  n.get("output_dir", r.output_dir);
  n.get("checkpoints", r.checkpoints);
  n.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  checked("env", [&] { env.validate(); });
  checked("ppo", [&] { ppo.validate(); });
  if (network.hidden.empty()) fail("ppo.hidden", "needs at least one hidden layer");
  for (auto h : network.hidden) {
    if (h == 0) fail("ppo.hidden", "layer widths must be >= 1");
  }
  if (!(network.initial_log_std >= nn::kLogStdMin && network.initial_log_std <= nn::kLogStdMax)) {
    fail("ppo.initial_log_std", "must be inside [-5, 2]");
  }
  if (!(vus.sampling.cpu_ghz[0] > 0.0 && vus.sampling.cpu_ghz[0] < vus.sampling.cpu_ghz[1])) {
    fail("vus.cpu_ghz", "must satisfy 0 < lo < hi");
  }
  if (!(vus.sampling.tau_f[0] >= 0 && vus.sampling.tau_f[0] <= vus.sampling.tau_f[1] &&
        vus.sampling.tau_f[1] <= env.slots_per_second)) {
    fail("vus.tau_f", "must satisfy 0 <= lo <= hi <= env.slots_per_second");
  }
  if (run.algos.empty()) fail("run.algos", "must not be empty");
  if (run.vu_counts.empty()) fail("run.vu_counts", "must not be empty");
  for (int n : run.vu_counts) {
    if (n < 1) fail("run.vu_counts", "entries must be >= 1");
    checked("run.vu_counts", [&] { (void)env::action_space_size(n, env.num_channels); });
  }
  if (run.seeds.empty()) fail("run.seeds", "must not be empty");
  if (run.total_steps <= 0) fail("run.total_steps", "must be > 0");
  if (run.eval_interval <= 0) fail("run.eval_interval", "must be > 0");
  if (run.eval_episodes < 1) fail("run.eval_episodes", "must be >= 1");
  if (run.output_dir.empty()) fail("run.output_dir", "must not be empty");
  const int max_vus = *std::max_element(run.vu_counts.begin(), run.vu_counts.end());
  if (vus.overrides.size() > static_cast<std::size_t>(max_vus)) {
    fail("vus.overrides", "more overrides than the largest VU count");
  }
  for (std::size_t i = 0; i < vus.overrides.size(); ++i) {
    const auto& o = vus.overrides[i];
    const std::string path = "vus.overrides[" + std::to_string(i) + "]";
    if (o.cpu_ghz && !(*o.cpu_ghz > 0.0)) fail(path + ".cpu_ghz", "must be > 0");
    if (o.tau_f && (*o.tau_f < 0 || *o.tau_f > env.slots_per_second)) fail(path + ".tau_f", "must be in [0, T]");
    if (o.distance_m && !(*o.distance_m >= 1.0)) fail(path + ".distance_m", "must be >= 1");
  }
}

ExperimentConfig parse_config(const json& tree) {
  ExperimentConfig cfg;
  if (tree.is_null()) {
    cfg.validate();
    return cfg;
  }
  Node root(tree, "");
  parse_env(sub(root, "env"), cfg.env);
  parse_vus(sub(root, "vus"), cfg.vus);
  parse_ppo(sub(root, "ppo"), cfg.ppo, cfg.network);
  parse_run(sub(root, "run"), cfg.run);
  root.finish();
  cfg.validate();
  return cfg;
}

namespace {

json parse_text(const std::string& text, const std::string& origin) {
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) != 0; })) {
    return json::object();
  }
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(origin + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) { return parse_config(parse_text(text, "config")); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(parse_text(read_file(path), path.string()));
}

json to_json(const ExperimentConfig& cfg) {
  const auto& e = cfg.env;
  json res = json::array();
  for (const auto& r : e.resolutions) res.push_back({{"label", r.label}, {"width", r.width}, {"height", r.height}});
  json k = std::isinf(e.fading.rician_k) ? json("inf") : json(e.fading.rician_k);
  json env = {
      {"slots_per_second", e.slots_per_second},
      {"num_channels", e.num_channels},
      {"bandwidth_hz", e.bandwidth_hz},
      {"noise_psd", e.noise_psd},
      {"p_max", e.p_max},
      {"server_hz", e.server_hz},
      {"eta", e.eta},
      {"resolutions", res},
      {"bits_per_pixel", e.bits_per_pixel},
      {"eyes_per_frame", e.eyes_per_frame},
      {"compression_range", e.compression_range},
      {"cycles_per_bit_range", e.cycles_per_bit_range},
      {"rewards",
       {{"resolution", e.rewards.resolution},
        {"fail", e.rewards.fail},
        {"energy", e.rewards.energy},
        {"worst", e.rewards.worst},
        {"terminate", e.rewards.terminate}}},
      {"fading", {{"beta0", e.fading.beta0}, {"alpha", e.fading.alpha}, {"rician_k", k}}},
      {"area_side_m", e.area_side_m},
      {"early_termination", e.early_termination},
      {"local_budget", env::to_string(e.local_budget)},
  };
  json overrides = json::array();
  for (const auto& o : cfg.vus.overrides) {
    json jo = json::object();
    if (o.cpu_ghz) jo["cpu_ghz"] = *o.cpu_ghz;
    if (o.battery) jo["battery"] = env::battery_label(*o.battery);
    if (o.tau_f) jo["tau_f"] = *o.tau_f;
    if (o.distance_m) jo["distance_m"] = *o.distance_m;
    overrides.push_back(jo);
  }
  json vus = {{"cpu_ghz", cfg.vus.sampling.cpu_ghz}, {"tau_f", cfg.vus.sampling.tau_f}, {"overrides", overrides}};
  const auto& p = cfg.ppo;
  json ppo = {
      {"gamma", p.gamma},
      {"lambda", p.lambda},
      {"clip", p.clip},
      {"epochs", p.epochs},
      {"minibatch", p.minibatch},
      {"segment", p.segment},
      {"target_sync", p.target_sync},
      {"value_target", ppo::to_string(p.value_target)},
      {"entropy_discrete", p.entropy_discrete},
      {"entropy_continuous", p.entropy_continuous},
      {"normalize_advantages", p.normalize_advantages},
      {"actor_lr", p.actor_adam.lr},
      {"critic_lr", p.critic_adam.lr},
      {"max_grad_norm", p.actor_adam.max_grad_norm},
      {"hidden", cfg.network.hidden},
      {"initial_log_std", cfg.network.initial_log_std},
  };
  json algos = json::array();
  for (auto a : cfg.run.algos) algos.push_back(train::to_string(a));
  json run = {
      {"algos", algos},
      {"vu_counts", cfg.run.vu_counts},
      {"seeds", cfg.run.seeds},
      {"total_steps", cfg.run.total_steps},
      {"eval_interval", cfg.run.eval_interval},
      {"eval_episodes", cfg.run.eval_episodes},
      {"eval_mode", to_string(cfg.run.eval_mode)},
      {"output_dir", cfg.run.output_dir},
      {"checkpoints", cfg.run.checkpoints},
  };
  return {{"env", env}, {"vus", vus}, {"ppo", ppo}, {"run", run}};
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  if (!tree.is_object()) tree = json::object();
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw std::invalid_argument("override key '" + key + "' descends into a non-object");
    node = &next;
    start = dot + 1;
  }
}

ExperimentConfig load_with_overrides(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json tree = path.empty() ? json::object() : parse_text(read_file(path), path.string());
  for (const auto& o : overrides) apply_override(tree, o);
  return parse_config(tree);
}

std::vector<env::VuProfile> make_profiles(const ExperimentConfig& cfg, int num_vus, std::uint64_t seed) {
  auto stream = rng::RandomStream(seed).substream("scenario");
  const auto n = static_cast<std::size_t>(num_vus);
  const std::size_t k = std::min(n, cfg.vus.overrides.size());
  return env::sample_profiles(n, cfg.env, cfg.vus.sampling,
                              std::span<const env::VuOverride>(cfg.vus.overrides.data(), k), stream);
}

train::TrainerSetup make_setup(const ExperimentConfig& cfg, train::AlgorithmKind algo, int num_vus,
                               std::uint64_t seed) {
  train::TrainerSetup s;
  s.env = cfg.env;
  s.profiles = make_profiles(cfg, num_vus, seed);
  s.hyper = cfg.ppo;
  s.network = cfg.network;
  s.kind = algo;
  s.seed = seed;
  return s;
}

}  // namespace ucha::config
