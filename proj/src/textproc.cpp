#include "plaba/textproc.hpp"

#include <algorithm>
#include <sstream>

#include "plaba/error.hpp"
#include "plaba/util.hpp"

namespace plaba::textproc {
namespace {

// Byte length of the Unicode White_Space code point starting at text[i],
// or 0 when text[i] does not start one.
std::size_t whitespace_at(std::string_view text, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 == ' ' || (b0 >= 0x09 && b0 <= 0x0d)) return 1;
  if (b0 < 0x80) return 0;
  auto byte = [&](std::size_t k) -> unsigned {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0u;
  };
  if (b0 == 0xc2 && (byte(1) == 0x85 || byte(1) == 0xa0)) return 2;
  if (b0 == 0xe1 && byte(1) == 0x9a && byte(2) == 0x80) return 3;  // U+1680
  if (b0 == 0xe2 && byte(1) == 0x80) {
    unsigned b2 = byte(2);
    if ((b2 >= 0x80 && b2 <= 0x8a) || b2 == 0xa8 || b2 == 0xa9 || b2 == 0xaf) return 3;
  }
  if (b0 == 0xe2 && byte(1) == 0x81 && byte(2) == 0x9f) return 3;  // U+205F
  if (b0 == 0xe3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

// Splits on whitespace, returning [begin, end) byte ranges of the words.
std::vector<std::pair<std::size_t, std::size_t>> word_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    std::size_t ws = whitespace_at(text, i);
    if (ws > 0) {
      if (start != std::string_view::npos) {
        spans.emplace_back(start, i);
        start = std::string_view::npos;
      }
      i += ws;
    } else {
      if (start == std::string_view::npos) start = i;
      ++i;
    }
  }
  if (start != std::string_view::npos) spans.emplace_back(start, text.size());
  return spans;
}

}  // namespace

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2f) || (u >= 0x3a && u <= 0x40) || (u >= 0x5b && u <= 0x60) ||
         (u >= 0x7b && u <= 0x7e);
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

TokenSeq tokenize(std::string_view text, const TokenizerConfig& config) {
  TokenSeq tokens;
  auto emit = [&](std::string_view piece) {
    if (piece.empty()) return;
    tokens.push_back(config.lowercase ? ascii_lower(piece) : std::string(piece));
  };
  for (auto [begin, end] : word_spans(text)) {
    std::string_view word = text.substr(begin, end - begin);
    if (!config.split_punct) {
      emit(word);
      continue;
    }
    std::size_t lead = 0;
    while (lead < word.size() && is_ascii_punct(word[lead])) ++lead;
    std::size_t trail = word.size();
    while (trail > lead && is_ascii_punct(word[trail - 1])) --trail;
    for (std::size_t k = 0; k < lead; ++k) emit(word.substr(k, 1));
    emit(word.substr(lead, trail - lead));
    for (std::size_t k = trail; k < word.size(); ++k) emit(word.substr(k, 1));
  }
  return tokens;
}

NGramCounts::NGramCounts(const TokenSeq& tokens, std::size_t n) : order_(n) {
  if (n == 0) throw ValidationError("n-gram order must be positive");
  if (tokens.size() < n) return;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts_[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    ++total_;
  }
}

int NGramCounts::count(const NGram& gram) const {
  auto it = counts_.find(gram);
  return it == counts_.end() ? 0 : it->second;
}

NGramCounts ngrams(const TokenSeq& tokens, std::size_t n) { return NGramCounts(tokens, n); }

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::set<std::string> default_abbreviations() {
  return {"e.g.", "i.e.", "vs.", "dr.", "mr.", "mrs.", "ms.", "prof.", "fig.", "figs.",
          "et al.", "al.", "etc.", "approx.", "no.", "vol.", "ref.", "st.", "resp.", "cf."};
}

std::set<std::string> load_abbreviations(const std::filesystem::path& path) {
  std::set<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::string entry = collapse_whitespace(line);
    if (entry.empty() || entry.front() == '#') continue;
    out.insert(ascii_lower(entry));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text,
                                         const std::set<std::string>& abbreviations) {
  std::vector<std::string> out;
  std::size_t sentence_start = 0;
  auto flush = [&](std::size_t end) {
    std::string piece = collapse_whitespace(text.substr(sentence_start, end - sentence_start));
    if (!piece.empty()) out.push_back(std::move(piece));
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    if (j >= text.size()) break;
    std::size_t ws = whitespace_at(text, j);
    if (ws == 0) continue;
    while (j < text.size() && (ws = whitespace_at(text, j)) > 0) j += ws;
    if (j >= text.size() || text[j] < 'A' || text[j] > 'Z') continue;

    // Word ending at the terminator, and the two-word form for entries
    // like "et al.".
    std::size_t w = i + 1;
    while (w > sentence_start && whitespace_at(text, w - 1) == 0) --w;
    std::string word = ascii_lower(text.substr(w, i + 1 - w));
    if (abbreviations.contains(word)) continue;
    if (w > sentence_start) {
      std::size_t p = w;
      while (p > sentence_start && whitespace_at(text, p - 1) == 1) --p;
      std::size_t q = p;
      while (q > sentence_start && whitespace_at(text, q - 1) == 0) --q;
      if (q < p && abbreviations.contains(ascii_lower(text.substr(q, p - q)) + " " + word)) {
        continue;
      }
    }
    flush(i + 1);
    sentence_start = j;
    i = j - 1;
  }
  flush(text.size());
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  static const std::set<std::string> kDefaults = default_abbreviations();
  return split_sentences(text, kDefaults);
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  for (auto [begin, end] : word_spans(text)) {
    if (!out.empty()) out.push_back(' ');
    out.append(text.substr(begin, end - begin));
  }
  return out;
}

}  // namespace plaba::textproc
