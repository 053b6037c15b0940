#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace infoctl {

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// QA-style answer normalization: lowercase, punctuation to spaces, drop the
// articles a/an/the, collapse whitespace. Only ASCII is case-folded or treated
// as punctuation; multibyte UTF-8 sequences pass through untouched.
inline std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::ispunct(c)) {
      cleaned.push_back(' ');
    } else if (c < 0x80) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cleaned.push_back(ch);
    }
  }
  std::vector<std::string> kept;
  for (auto& tok : split_whitespace(cleaned)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    kept.push_back(std::move(tok));
  }
  return join(kept, " ");
}

// Tokens of the normalized text. Shared by the hash embedder and the toy scorer.
inline std::vector<std::string> normalized_tokens(std::string_view text) {
  return split_whitespace(normalize_answer(text));
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace infoctl
