#include "manifest.hpp"

#include <array>
#include <chrono>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "metsfuse/error.hpp"

namespace metsfuse::cli {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw DataError("sha256: init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string sha256_text(const std::string& text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.hex();
}

std::string Clock::now() const {
  if (frozen_) return "1970-01-01T00:00:00Z";
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string RunManifest::run_id() const {
  nlohmann::json key{{"command", command}, {"config", config}, {"seed", seed}};
  for (const auto& i : inputs) key["inputs"].push_back(i.sha256);
  return sha256_text(key.dump()).substr(0, 16);
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.push_back({path.string(), sha256_file(path)});
}

nlohmann::json RunManifest::to_json() const {
  auto files = [](const std::vector<FileDigest>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  return {{"run_id", run_id()},   {"command", command},          {"tool_version", tool_version},
          {"seed", seed},         {"config", config},            {"inputs", files(inputs)},
          {"outputs", files(outputs)}, {"started_at", started_at}, {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    for (const auto& f : j.at("inputs")) m.inputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& f : j.at("outputs")) m.outputs.push_back({f.at("path"), f.at("sha256")});
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed manifest: {}", e.what()));
  }
  return m;
}

void RunManifest::write(const std::filesystem::path& dir) {
  outputs.clear();
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kManifestName) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) outputs.push_back({std::filesystem::relative(f, dir).generic_string(), sha256_file(f)});
  std::ofstream out(dir / kManifestName);
  if (!out) throw DataError(fmt::format("cannot write {}", (dir / kManifestName).string()));
  out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw DataError(fmt::format("{} has no {}", dir.string(), kManifestName));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", (dir / kManifestName).string(), e.what()));
  }
  return from_json(j);
}

RunManifest verify_directory(const std::filesystem::path& dir) {
  auto m = RunManifest::read(dir);
  for (const auto& f : m.outputs) {
    auto path = dir / f.path;
    if (!std::filesystem::exists(path)) throw DataError(fmt::format("{} is listed in the manifest but missing", path.string()));
    if (sha256_file(path) != f.sha256) {
      throw DataError(fmt::format("digest mismatch for {}: the file changed after the run that wrote it", path.string()));
    }
  }
  return m;
}

}  // namespace metsfuse::cli
