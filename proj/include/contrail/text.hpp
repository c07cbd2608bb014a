#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace contrail::text {

inline constexpr std::string_view kStopwordListVersion = "en-1";

// Standard English list (NLTK) with apostrophe-free variants. It already
// carries the question-framing words "did", "does", "is" and "no".
inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kWords = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "youre",
      "youve", "youll", "youd", "your", "yours", "yourself", "yourselves", "he", "him",
      "his", "himself", "she", "shes", "her", "hers", "herself", "it", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom",
      "this", "that", "thatll", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a",
      "an", "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at",
      "by", "for", "with", "about", "against", "between", "into", "through", "during",
      "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on",
      "off", "over", "under", "again", "further", "then", "once", "here", "there", "when",
      "where", "why", "how", "all", "any", "both", "each", "few", "more", "most", "other",
      "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too",
      "very", "s", "t", "can", "will", "just", "don", "dont", "should", "shouldve", "now",
      "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "arent", "couldn", "couldnt",
      "didn", "didnt", "doesn", "doesnt", "hadn", "hadnt", "hasn", "hasnt", "haven",
      "havent", "isn", "isnt", "ma", "mightn", "mightnt", "mustn", "mustnt", "needn",
      "neednt", "shan", "shant", "shouldn", "shouldnt", "wasn", "wasnt", "weren", "werent",
      "won", "wont", "wouldn", "wouldnt"};
  return kWords;
}

inline bool is_stopword(std::string_view token) {
  return stopwords().count(std::string(token)) > 0;
}

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one code point; invalid sequences yield U+FFFD and advance one byte.
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
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
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000 || cp == 0xFEFF;
}

inline bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  return (cp >= 0x00A1 && cp <= 0x00BF && cp != 0x00AA && cp != 0x00B5 && cp != 0x00BA) ||
         cp == 0x00D7 || cp == 0x00F7 || (cp >= 0x2010 && cp <= 0x2027) ||
         (cp >= 0x2030 && cp <= 0x205E) || (cp >= 0x3001 && cp <= 0x3003) ||
         (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || cp == 0xFFFD;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 32;
  if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 32;
  if (cp >= 0x0410 && cp <= 0x042F) return cp + 32;
  return cp;
}

}  // namespace detail

/// Lowercases, strips punctuation inside tokens and splits on whitespace.
/// "AT&T" becomes "att"; "covid-19" becomes "covid19".
inline std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < input.size()) {
    const char32_t cp = detail::next_codepoint(input, i);
    if (detail::is_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!detail::is_punct(cp)) {
      detail::append_utf8(current, detail::to_lower(cp));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// tokenize() followed by stopword removal, order preserved.
inline std::vector<std::string> content_tokens(std::string_view input) {
  auto tokens = tokenize(input);
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

/// Normalizes a single query term the same way document text is normalized.
inline std::string normalize_term(std::string_view term) {
  std::string out;
  for (auto& t : tokenize(term)) out += t;
  return out;
}

inline bool is_blank(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!detail::is_space(detail::next_codepoint(s, i))) return false;
  }
  return true;
}

}  // namespace contrail::text
