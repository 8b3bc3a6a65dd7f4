#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace plaba::textproc {

using TokenSeq = std::vector<std::string>;
using NGram = std::vector<std::string>;

struct TokenizerConfig {
  bool lowercase = true;
  bool split_punct = true;
};

// Splits on Unicode whitespace. With split_punct, each ASCII punctuation
// character in a token's leading or trailing run becomes its own token;
// interior punctuation ("p<0.05") stays attached. Lowercasing is ASCII-only.
TokenSeq tokenize(std::string_view text, const TokenizerConfig& config = {});

// Multiset of n-token windows.
class NGramCounts {
 public:
  NGramCounts() = default;
  NGramCounts(const TokenSeq& tokens, std::size_t n);

  std::size_t order() const { return order_; }
  const std::map<NGram, int>& counts() const { return counts_; }
  int count(const NGram& gram) const;
  // Sum of all counts (= number of windows).
  std::size_t total() const { return total_; }
  bool empty() const { return counts_.empty(); }

 private:
  std::size_t order_ = 0;
  std::size_t total_ = 0;
  std::map<NGram, int> counts_;
};

// Throws ValidationError when n == 0.
NGramCounts ngrams(const TokenSeq& tokens, std::size_t n);

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

std::set<std::string> default_abbreviations();

// Reads one abbreviation per line; blank lines and '#' comments ignored.
std::set<std::string> load_abbreviations(const std::filesystem::path& path);

// Sentence boundary after '.', '?' or '!' when followed by whitespace and an
// uppercase ASCII letter, unless the word ending there is a listed
// abbreviation. Returned sentences are whitespace-trimmed.
std::vector<std::string> split_sentences(std::string_view text,
                                         const std::set<std::string>& abbreviations);
std::vector<std::string> split_sentences(std::string_view text);

// Collapses runs of whitespace into single spaces and trims both ends.
std::string collapse_whitespace(std::string_view text);

std::string ascii_lower(std::string_view text);

bool is_ascii_punct(char c);

}  // namespace plaba::textproc
