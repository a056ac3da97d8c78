#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "metsfuse/corpus/tokenizer.hpp"

namespace metsfuse::corpus {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kReservedIds = 3;

/// CLS-prefixed ids with the token strings and byte offsets they came from.
/// The CLS entry has an empty token and offsets (0, 0). `mask` is 1 on real tokens and 0
/// on padding.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<double> mask;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;

  std::size_t length() const noexcept { return ids.size(); }
  std::size_t real_length() const noexcept;
  /// Copy padded with PAD ids (mask 0) up to `length`.
  TokenSequence padded(std::size_t length) const;
};

class Vocabulary {
 public:
  Vocabulary();

  /// Ranks tokens by descending frequency, ties lexicographically, and keeps the top
  /// `max_size - 3` after the reserved PAD/UNK/CLS ids.
  static Vocabulary build(std::span<const std::string> texts, std::size_t max_size = 2048);

  static Vocabulary read_tsv(const std::filesystem::path& path);
  static Vocabulary parse_tsv(std::string_view text);
  void write_tsv(const std::filesystem::path& path) const;
  std::string to_tsv() const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  /// Id of a token, UNK when absent.
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  /// Tokenizes and maps to ids, prefixing CLS. Blank text yields CLS alone. Sequences
  /// longer than max_len are truncated with a warning.
  TokenSequence encode(std::string_view text, std::size_t max_len = 64) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace metsfuse::corpus
