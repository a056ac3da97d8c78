#include "metsfuse/cohort/augment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "metsfuse/corpus/tokenizer.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"

namespace metsfuse::cohort {
namespace {

/// Byte length of a clause delimiter at position i, 0 if none.
std::size_t delimiter_at(std::string_view s, std::size_t i) {
  static constexpr std::string_view ascii = ",;.!?\n";
  if (ascii.find(s[i]) != std::string_view::npos) return 1;
  for (std::string_view wide : {"\xEF\xBC\x8C", "\xEF\xBC\x9B", "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F",
                                "\xE3\x80\x81"}) {
    if (s.substr(i, wide.size()) == wide) return wide.size();
  }
  return 0;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ClauseFilter::ClauseFilter() : ClauseFilter(default_patterns()) {}

ClauseFilter::ClauseFilter(std::vector<std::string> patterns) {
  for (const auto& p : patterns) {
    try {
      patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw ConfigError(fmt::format("clause filter pattern '{}': {}", p, e.what()));
    }
  }
}

std::vector<std::string> ClauseFilter::default_patterns() {
  return {R"(\b(weather|rain|rainy|raining|rained|sunny|snow|snowy|snowing|wind|windy|storm|stormy|foggy|fog|cloudy|humid|humidity|hot|cold|chilly|freezing|temperature)\b)",
          "天气|下雨|下雪|刮风|雾霾|炎热|寒冷|气温"};
}

std::string ClauseFilter::apply(std::string_view text, num::Rng&) const {
  std::vector<std::string> kept;
  std::size_t start = 0;
  bool removed = false;
  auto flush = [&](std::size_t end) {
    std::string clause(text.substr(start, end - start));
    std::string body = trim(clause);
    if (body.empty()) return;
    bool drop = false;
    for (const auto& re : patterns_) {
      if (std::regex_search(body, re)) {
        drop = true;
        break;
      }
    }
    if (drop) {
      removed = true;
    } else {
      kept.push_back(body);
    }
  };
  for (std::size_t i = 0; i < text.size();) {
    if (auto n = delimiter_at(text, i)) {
      flush(i + n);
      i += n;
      start = i;
    } else {
      ++i;
    }
  }
  flush(text.size());
  if (!removed || kept.empty()) return std::string(text);
  std::string out;
  for (const auto& c : kept) {
    if (!out.empty()) out += ' ';
    out += c;
  }
  return out;
}

RoundTripLexicon RoundTripLexicon::parse(std::string_view tsv) {
  RoundTripLexicon lex;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    auto nl = tsv.find('\n', pos);
    auto line = tsv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? tsv.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 == line.size()) {
      throw DataError(fmt::format("lexicon line {}: expected token<TAB>pivot", lineno));
    }
    std::string token(line.substr(0, tab)), pivot(line.substr(tab + 1));
    if (!lex.forward_.emplace(token, pivot).second) {
      throw DataError(fmt::format("lexicon line {}: duplicate token '{}'", lineno, token));
    }
    lex.backward_[pivot].push_back(token);
  }
  return lex;
}

RoundTripLexicon RoundTripLexicon::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RoundTripLexicon RoundTripLexicon::bundled() {
  static const RoundTripLexicon lex = parse(bundled_lexicon_tsv());
  return lex;
}

std::string RoundTripLexicon::pivot(const std::string& token) const {
  auto it = forward_.find(token);
  return it == forward_.end() ? std::string{} : it->second;
}

const std::vector<std::string>& RoundTripLexicon::back(const std::string& pivot) const {
  static const std::vector<std::string> none;
  auto it = backward_.find(pivot);
  return it == backward_.end() ? none : it->second;
}

std::string RoundTripLexicon::apply(std::string_view text, num::Rng& rng) const {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& tok : corpus::split_tokens(text)) {
    auto it = forward_.find(tok.text);
    if (it == forward_.end()) continue;
    const auto& choices = backward_.at(it->second);
    const auto& pick = choices[static_cast<std::size_t>(rng.below(choices.size()))];
    out.append(text.substr(cursor, tok.begin - cursor));
    out += pick;
    cursor = tok.end;
  }
  out.append(text.substr(cursor));
  return out;
}

AugmenterList default_augmenters() {
  return {std::make_shared<ClauseFilter>(), std::make_shared<RoundTripLexicon>(RoundTripLexicon::bundled())};
}

std::size_t augmentation_count(std::size_t minority, std::size_t total, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError(fmt::format("target ratio {} outside [0, 1)", ratio));
  double m = static_cast<double>(minority), t = static_cast<double>(total);
  if (total == 0 || m >= ratio * t) return 0;
  // (m + n) / (t + n) >= r  <=>  n >= (r t - m) / (1 - r)
  auto n = static_cast<std::size_t>(std::ceil((ratio * t - m) / (1.0 - ratio) - 1e-9));
  while (static_cast<double>(minority + n) < ratio * static_cast<double>(total + n)) ++n;
  return n;
}

std::vector<DailyRecord> augment(std::span<const DailyRecord> records, const SubjectLabels& labels,
                                 const AugmentConfig& cfg, const AugmenterList& augmenters) {
  std::vector<DailyRecord> out(records.begin(), records.end());
  auto y = record_labels(records, labels);
  std::size_t pos = 0;
  for (int v : y) pos += v != 0;
  std::size_t total = records.size();
  if (total == 0) throw DataError("augment: no records");
  int minority_class = pos * 2 <= total ? 1 : 0;
  std::size_t minority = minority_class == 1 ? pos : total - pos;
  if (cfg.target_ratio > 0.5 && augmenters.empty()) {
    throw ConfigError(fmt::format("augment: target ratio {} needs at least one augmenter", cfg.target_ratio));
  }
  std::size_t need = augmentation_count(minority, total, cfg.target_ratio);
  if (need == 0) return out;

  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (y[i] == minority_class && !records[i].is_augmented() && records[i].text) sources.push_back(i);
  }
  if (sources.empty()) throw DataError("augment: the minority class has no source records");
  if (need > sources.size() * cfg.max_copies_per_source) {
    throw DataError(fmt::format("augment: {} copies needed but {} sources allow at most {} each", need,
                                sources.size(), cfg.max_copies_per_source));
  }

  auto order_rng = num::Rng::derive(cfg.seed, {num::stream_id("augment-order")});
  std::size_t made = 0;
  for (std::size_t round = 0; made < need; ++round) {
    auto order = sources;
    order_rng.shuffle(order);
    for (std::size_t i : order) {
      if (made == need) break;
      const auto& src = records[i];
      auto rng = num::Rng::derive(cfg.seed, {num::stream_id("augment-text"), i, round});
      std::string text = *src.text;
      for (const auto& a : augmenters) text = a->apply(text, rng);
      DailyRecord copy = src;
      copy.text = std::move(text);
      copy.provenance.text = Provenance::Augmented;
      copy.provenance.physio.fill(Provenance::Augmented);
      out.push_back(std::move(copy));
      ++made;
    }
  }
  logger()->info("augment: added {} copies of class {} (ratio {:.3f} -> {:.3f})", made, minority_class,
                 static_cast<double>(minority) / static_cast<double>(total),
                 static_cast<double>(minority + made) / static_cast<double>(total + made));
  return out;
}

}  // namespace metsfuse::cohort
