#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metsfuse/cohort/types.hpp"
#include "metsfuse/numerics/rng.hpp"

namespace metsfuse::cohort {

/// Text rewrite applied to each augmented copy. Implementations must be deterministic given
/// the Rng state.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual std::string name() const = 0;
  virtual std::string apply(std::string_view text, num::Rng& rng) const = 0;
};

/// Removes clauses (split at , ; . ! ? and their full-width forms) that match any pattern.
/// The default pattern list targets weather mentions. Text that would become empty is kept.
class ClauseFilter : public Augmenter {
 public:
  ClauseFilter();
  explicit ClauseFilter(std::vector<std::string> patterns);

  std::string name() const override { return "clause-filter"; }
  std::string apply(std::string_view text, num::Rng& rng) const override;

  static std::vector<std::string> default_patterns();

 private:
  std::vector<std::regex> patterns_;
};

/// Token substitution through a bilingual lexicon and back. Each known token maps to its
/// pivot, and the pivot maps back to one of the tokens sharing it, chosen uniformly. Tokens
/// absent from the lexicon are left alone.
class RoundTripLexicon : public Augmenter {
 public:
  /// Lexicon text: "token<TAB>pivot" per line, '#' comments allowed.
  static RoundTripLexicon parse(std::string_view tsv);
  static RoundTripLexicon read(const std::string& path);
  /// The lexicon bundled with the library.
  static RoundTripLexicon bundled();

  std::string name() const override { return "round-trip-lexicon"; }
  std::string apply(std::string_view text, num::Rng& rng) const override;

  std::size_t size() const noexcept { return forward_.size(); }
  /// Pivot of a token, empty when absent.
  std::string pivot(const std::string& token) const;
  const std::vector<std::string>& back(const std::string& pivot) const;

 private:
  std::map<std::string, std::string> forward_;
  std::map<std::string, std::vector<std::string>> backward_;
};

std::string_view bundled_lexicon_tsv();

using AugmenterList = std::vector<std::shared_ptr<const Augmenter>>;

/// Clause filter followed by the bundled round-trip lexicon.
AugmenterList default_augmenters();

struct AugmentConfig {
  double target_ratio = 0.5;
  std::size_t max_copies_per_source = 16;
  std::uint64_t seed = 0;
};

/// Number of minority copies needed so minority / total reaches `ratio`.
std::size_t augmentation_count(std::size_t minority, std::size_t total, double ratio);

/// Appends augmented copies of minority-class records until minority / total >= target_ratio.
/// Copies keep subject_id and day_index of their source, carry provenance "augmented", and
/// pass the text through the augmenters in order. Sources are used round by round in a
/// shuffled order, at most max_copies_per_source times each. Records already augmented are
/// never used as sources.
std::vector<DailyRecord> augment(std::span<const DailyRecord> records, const SubjectLabels& labels,
                                 const AugmentConfig& cfg, const AugmenterList& augmenters);

}  // namespace metsfuse::cohort
