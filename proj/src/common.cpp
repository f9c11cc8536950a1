#include "qu/common.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

namespace qu {

std::string fold_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  // trim
  size_t b = out.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = out.find_last_not_of(" \t\r\n");
  return out.substr(b, e - b + 1);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    bool word_char = (c >= 0x80) || std::isalnum(c);
    if (word_char) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",     "an",    "the",   "is",    "are",   "was",    "were",  "be",
      "do",    "does",  "did",   "i",     "you",   "we",     "they",  "he",
      "she",   "it",    "my",    "your",  "our",   "their",  "me",    "them",
      "this",  "that",  "these", "those", "for",   "of",     "in",    "on",
      "at",    "to",    "from",  "with",  "by",    "about",  "into",  "over",
      "what",  "when",  "where", "which", "who",   "whose",  "how",   "why",
      "can",   "could", "should", "would", "will", "shall",  "may",   "might",
      "have",  "has",   "had",   "and",   "or",    "not",    "no",    "yes",
      "please", "want", "need",  "show",  "find",  "get",    "buy",   "looking",
      "there", "here",  "any",   "some",  "if",    "than",   "then",  "so",
      "as",    "am",    "up",    "out",   "its",
  };
  return kStopwords;
}

}  // namespace

bool is_stopword(const std::string& token) { return stopword_set().count(token) > 0; }

std::vector<std::string> content_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!is_stopword(t)) out.push_back(t);
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& t : sa) {
    inter += sb.count(t);
  }
  size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace qu
