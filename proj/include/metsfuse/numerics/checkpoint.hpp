#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/numerics/tape.hpp"

namespace metsfuse::num {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointHeader {
  std::string architecture;
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::uint64_t seed = 0;
  /// Free-form metadata (encoder config, feature names, training summary).
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

// Container layout:
//   8 bytes   magic "MFCKPT\0\0"
//   8 bytes   header length N, little-endian uint64
//   N bytes   UTF-8 JSON header: format_version, dtype ("float64"), architecture,
//             hyperparameters, seed, extra, parameters: [{name, shape}]
//   then      for each parameter in header order, prod(shape) little-endian IEEE-754 doubles
std::string serialize_checkpoint(const CheckpointHeader& header, const ParameterSet& params);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into a parameter set with identical names and shapes.
void load_parameters(const Checkpoint& ckpt, ParameterSet& params);

}  // namespace metsfuse::num
