#include "metsfuse/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "metsfuse/error.hpp"

namespace metsfuse::num {
namespace {

constexpr char kMagic[8] = {'M', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string serialize_checkpoint(const CheckpointHeader& header, const ParameterSet& params) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["dtype"] = "float64";
  j["architecture"] = header.architecture;
  j["hyperparameters"] = header.hyperparameters;
  j["seed"] = header.seed;
  j["extra"] = header.extra;
  j["parameters"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    j["parameters"].push_back({{"name", params[i].name}, {"shape", params[i].value.shape()}});
  }
  const std::string text = j.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params[i].value.storage()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (16 + header_len > bytes.size()) throw DataError("checkpoint: truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (j.value("format_version", 0) != kCheckpointFormatVersion) {
    throw DataError("checkpoint: unsupported format version");
  }
  if (j.value("dtype", "") != "float64") throw DataError("checkpoint: unsupported dtype");
  Checkpoint ckpt;
  ckpt.header.architecture = j.at("architecture").get<std::string>();
  ckpt.header.hyperparameters = j.at("hyperparameters");
  ckpt.header.seed = j.at("seed").get<std::uint64_t>();
  ckpt.header.extra = j.value("extra", nlohmann::json::object());
  std::size_t pos = 16 + header_len;
  for (const auto& entry : j.at("parameters")) {
    auto shape = entry.at("shape").get<Shape>();
    const std::size_t n = element_count(shape);
    if (pos + 8 * n > bytes.size()) throw DataError("checkpoint: truncated tensor data");
    std::vector<double> data(n);
    for (std::size_t k = 0; k < n; ++k, pos += 8) data[k] = std::bit_cast<double>(get_u64(bytes, pos));
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  if (pos != bytes.size()) throw DataError("checkpoint: trailing bytes after tensor data");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(header, params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void load_parameters(const Checkpoint& ckpt, ParameterSet& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = ckpt.tensors[i];
    if (name != params[i].name || tensor.shape() != params[i].value.shape()) {
      throw DataError("checkpoint tensor " + name + " " + to_string(tensor.shape()) + " does not match parameter " +
                      params[i].name + " " + to_string(params[i].value.shape()));
    }
    params[i].value.storage() = tensor.storage();
  }
}

}  // namespace metsfuse::num
