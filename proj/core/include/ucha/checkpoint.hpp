#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ucha/trainers.hpp"
#include "ucha/vr_env.hpp"

namespace ucha::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

/// Everything needed to rebuild an evaluation run. `config_json` is the
/// experiment configuration that produced the weights, stored verbatim.
struct Checkpoint {
  std::string config_json;
  train::AlgorithmKind algo = train::AlgorithmKind::kUcha;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::vector<env::VuProfile> profiles;
  int num_channels = 0;
  train::AgentNets nets;  ///< optimizer moments are not stored
};

/// Binary little-endian layout, see docs/formats.md. Writes to a temporary
/// file and renames it into place.
void save(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws std::runtime_error on a bad magic, version or truncated file.
Checkpoint load(const std::filesystem::path& path);

}  // namespace ucha::ckpt
