#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace metsfuse::corpus {

/// A token with its byte range [begin, end) in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

/// Segmentation rules, applied to UTF-8 input:
///  - a contiguous run of letters/digits (ASCII, or non-CJK codepoints outside the
///    punctuation blocks) is one token;
///  - each CJK ideograph or kana codepoint is its own token;
///  - whitespace, punctuation and invalid bytes separate tokens and are dropped;
///  - ASCII letters are lowercased.
/// Total: never throws, returns an empty list for text without tokens.
std::vector<Token> split_tokens(std::string_view text);

/// split_tokens() for a daily text; throws DataError when the text is blank.
std::vector<Token> tokenize(std::string_view text);

}  // namespace metsfuse::corpus
