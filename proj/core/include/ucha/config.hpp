#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucha/ppo.hpp"
#include "ucha/trainers.hpp"
#include "ucha/vr_env.hpp"

namespace ucha::config {

/// Scenario generation: sampling ranges plus optional per-VU overrides.
struct VuSection {
  env::ProfileSampling sampling;
  std::vector<env::VuOverride> overrides;  ///< overrides[i] applies to VU i
};

struct RunSection {
  std::vector<train::AlgorithmKind> algos{train::AlgorithmKind::kUcha, train::AlgorithmKind::kHappo,
                                          train::AlgorithmKind::kIppo, train::AlgorithmKind::kRandom};
  std::vector<int> vu_counts{5, 6, 7, 8};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::int64_t total_steps = 200000;
  std::int64_t eval_interval = 500;
  int eval_episodes = 5;
  train::ActionMode eval_mode = train::ActionMode::kSample;
  std::string output_dir = "runs";
  bool checkpoints = true;
};

struct ExperimentConfig {
  env::EnvConfig env;
  VuSection vus;
  ppo::PpoHyper ppo;
  train::NetworkConfig network;
  RunSection run;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

/// Fills defaults, rejects unknown keys and validates. Errors carry the key
/// path, e.g. "env.p_max: must be > 0".
ExperimentConfig parse_config(const nlohmann::json& tree);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Parses file contents; an empty or all-whitespace string gives the defaults.
ExperimentConfig parse_config_text(const std::string& text);

/// Complete tree with every field present.
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string dump_config(const ExperimentConfig& cfg);

/// Applies "a.b.c=value" to a tree; value is parsed as JSON, else taken as a
/// string.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Tree for `path` (or an empty object when the path is empty) with the
/// overrides applied, then parsed.
ExperimentConfig load_with_overrides(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Scenario for one cell: N profiles drawn from the seed's scenario stream.
std::vector<env::VuProfile> make_profiles(const ExperimentConfig& cfg, int num_vus, std::uint64_t seed);
train::TrainerSetup make_setup(const ExperimentConfig& cfg, train::AlgorithmKind algo, int num_vus,
                               std::uint64_t seed);

std::string to_string(train::ActionMode mode);
train::ActionMode parse_action_mode(const std::string& s);

}  // namespace ucha::config
