#include "metsfuse/corpus/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"

namespace metsfuse::corpus {

std::size_t TokenSequence::real_length() const noexcept {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](double m) { return m != 0.0; }));
}

TokenSequence TokenSequence::padded(std::size_t length) const {
  TokenSequence out = *this;
  while (out.ids.size() < length) {
    out.ids.push_back(kPadId);
    out.mask.push_back(0.0);
    out.tokens.emplace_back();
    out.offsets.emplace_back(0, 0);
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"[PAD]", "[UNK]", "[CLS]"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t max_size) {
  if (max_size < kReservedIds) {
    throw ConfigError(fmt::format("vocabulary max size {} is smaller than the {} reserved ids", max_size, kReservedIds));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : split_tokens(text)) ++counts[tok.text];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  const std::size_t keep = std::min(ranked.size(), max_size - kReservedIds);
  for (std::size_t i = 0; i < keep; ++i) {
    vocab.ids_.emplace(ranked[i].first, vocab.tokens_.size());
    vocab.tokens_.push_back(ranked[i].first);
  }
  return vocab;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

TokenSequence Vocabulary::encode(std::string_view text, std::size_t max_len) const {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  TokenSequence seq;
  seq.ids.push_back(kClsId);
  seq.mask.push_back(1.0);
  seq.tokens.emplace_back();
  seq.offsets.emplace_back(0, 0);
  auto toks = split_tokens(text);
  if (toks.size() + 1 > max_len) {
    logger()->warn("text with {} tokens truncated to max_len {}", toks.size() + 1, max_len);
    toks.resize(max_len - 1);
  }
  for (auto& t : toks) {
    seq.ids.push_back(id(t.text));
    seq.mask.push_back(1.0);
    seq.offsets.emplace_back(t.begin, t.end);
    seq.tokens.push_back(std::move(t.text));
  }
  return seq;
}

std::string Vocabulary::to_tsv() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out += fmt::format("{}\t{}\n", tokens_[i], i);
  return out;
}

void Vocabulary::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  out << to_tsv();
}

Vocabulary Vocabulary::parse_tsv(std::string_view text) {
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(fmt::format("vocabulary line {}: missing tab", line_no));
    const std::string token = line.substr(0, tab);
    std::size_t id = 0;
    try {
      id = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError(fmt::format("vocabulary line {}: bad id", line_no));
    }
    if (id != vocab.tokens_.size()) {
      throw DataError(fmt::format("vocabulary line {}: ids must be dense and ordered, got {}", line_no, id));
    }
    if (!vocab.ids_.emplace(token, id).second) throw DataError(fmt::format("vocabulary line {}: duplicate token", line_no));
    vocab.tokens_.push_back(token);
  }
  if (vocab.tokens_.size() < kReservedIds || vocab.tokens_[kPadId] != "[PAD]" || vocab.tokens_[kUnkId] != "[UNK]" ||
      vocab.tokens_[kClsId] != "[CLS]") {
    throw DataError("vocabulary: reserved ids [PAD]=0 [UNK]=1 [CLS]=2 missing");
  }
  return vocab;
}

Vocabulary Vocabulary::read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str());
}

}  // namespace metsfuse::corpus
