#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace metsfuse::cli {

inline constexpr const char* kManifestName = "manifest.json";

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

/// Timestamps in UTC, or a fixed epoch when the clock is frozen.
class Clock {
 public:
  explicit Clock(bool frozen) : frozen_(frozen) {}
  std::string now() const;

 private:
  bool frozen_;
};

struct FileDigest {
  std::string path;  // relative to the manifest's directory for outputs
  std::string sha256;
};

/// One per output directory. The run id is a digest of command, config, seed and input
/// digests, so reruns of the same thing share it.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::string started_at;
  std::string finished_at;

  std::string run_id() const;
  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  /// Digests every regular file in `dir` except the manifest and writes manifest.json there.
  void write(const std::filesystem::path& dir);
  static RunManifest read(const std::filesystem::path& dir);
};

/// Checks every output listed in dir/manifest.json against its file. Throws DataError on a
/// missing manifest, a missing file or a digest mismatch.
RunManifest verify_directory(const std::filesystem::path& dir);

}  // namespace metsfuse::cli
