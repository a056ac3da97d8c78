#include "metsfuse/corpus/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "metsfuse/error.hpp"

namespace metsfuse::corpus {
namespace {

enum class Kind { Separator, Word, Ideograph };

struct Decoded {
  char32_t cp = 0;
  std::size_t length = 1;
  bool valid = false;
};

Decoded decode(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1, true};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0, 1, false};
  }
  if (i + len > s.size()) return {0, 1, false};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0, 1, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len, true};
}

bool is_ideograph(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0x20000 && cp <= 0x2FA1F) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x3040 && cp <= 0x30FF);
}

bool is_non_ascii_separator(char32_t cp) {
  return (cp >= 0x0080 && cp <= 0x00BF) ||  // Latin-1 punctuation and symbols
         cp == 0x00D7 || cp == 0x00F7 ||
         (cp >= 0x2000 && cp <= 0x2BFF) ||  // general punctuation, symbols, arrows
         (cp >= 0x3000 && cp <= 0x303F) ||  // CJK punctuation
         (cp >= 0xFE30 && cp <= 0xFE4F) || (cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) || cp == 0xFEFF;
}

Kind classify(const Decoded& d) {
  if (!d.valid) return Kind::Separator;
  if (d.cp < 0x80) return std::isalnum(static_cast<int>(d.cp)) != 0 ? Kind::Word : Kind::Separator;
  if (is_ideograph(d.cp)) return Kind::Ideograph;
  if (is_non_ascii_separator(d.cp)) return Kind::Separator;
  return Kind::Word;
}

}  // namespace

std::vector<Token> split_tokens(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t word_begin = std::string_view::npos;
  auto close_word = [&](std::size_t at) {
    if (word_begin == std::string_view::npos) return;
    std::string word(text.substr(word_begin, at - word_begin));
    std::transform(word.begin(), word.end(), word.begin(), [](char c) {
      return static_cast<unsigned char>(c) < 0x80 ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c;
    });
    out.push_back({std::move(word), word_begin, at});
    word_begin = std::string_view::npos;
  };
  while (i < text.size()) {
    const Decoded d = decode(text, i);
    switch (classify(d)) {
      case Kind::Word:
        if (word_begin == std::string_view::npos) word_begin = i;
        break;
      case Kind::Ideograph:
        close_word(i);
        out.push_back({std::string(text.substr(i, d.length)), i, i + d.length});
        break;
      case Kind::Separator:
        close_word(i);
        break;
    }
    i += d.length;
  }
  close_word(text.size());
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  const bool blank = std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
  if (blank) throw DataError("tokenize: empty text");
  return split_tokens(text);
}

}  // namespace metsfuse::corpus
