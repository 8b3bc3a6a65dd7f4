#include <cctype>
#include <regex>

#include "plaba/adapt.hpp"
#include "plaba/error.hpp"
#include "plaba/textproc.hpp"
#include "plaba/util.hpp"

namespace plaba::adapt {

using nlohmann::json;
using textproc::ascii_lower;
using textproc::is_ascii_punct;

void GuidelineLexicon::add_abbreviation(const std::string& short_form,
                                        const std::string& long_form) {
  std::string key = textproc::collapse_whitespace(ascii_lower(short_form));
  if (key.empty()) throw ValidationError("lexicon: empty abbreviation key");
  if (long_form.empty()) throw ValidationError("lexicon: empty expansion for " + short_form);
  abbreviations[key] = long_form;
}

void GuidelineLexicon::add_gloss(const std::string& term, const std::string& gloss) {
  std::string key = textproc::collapse_whitespace(ascii_lower(term));
  if (key.empty()) throw ValidationError("lexicon: empty jargon key");
  if (gloss.empty()) throw ValidationError("lexicon: empty gloss for " + term);
  jargon_glosses[key] = gloss;
}

GuidelineLexicon lexicon_from_json(const json& doc) {
  GuidelineLexicon lex;
  try {
    if (doc.contains("abbreviations")) {
      for (const auto& [k, v] : doc.at("abbreviations").items()) lex.add_abbreviation(k, v.get<std::string>());
    }
    if (doc.contains("jargon_glosses")) {
      for (const auto& [k, v] : doc.at("jargon_glosses").items()) lex.add_gloss(k, v.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed lexicon: ") + e.what());
  }
  return lex;
}

json lexicon_to_json(const GuidelineLexicon& lexicon) {
  return {{"abbreviations", lexicon.abbreviations}, {"jargon_glosses", lexicon.jargon_glosses}};
}

GuidelineLexicon load_lexicon(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return lexicon_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

// A whitespace-delimited word split into leading punctuation, core, and
// trailing punctuation. Lexicon matching looks at cores only.
struct Chunk {
  std::string lead;
  std::string core;
  std::string trail;

  std::string text() const { return lead + core + trail; }
};

std::vector<Chunk> chunk(const std::string& sentence) {
  std::vector<Chunk> out;
  std::string collapsed = textproc::collapse_whitespace(sentence);
  std::size_t start = 0;
  while (start < collapsed.size()) {
    std::size_t end = collapsed.find(' ', start);
    if (end == std::string::npos) end = collapsed.size();
    std::string word = collapsed.substr(start, end - start);
    std::size_t lead = 0;
    while (lead < word.size() && is_ascii_punct(word[lead])) ++lead;
    std::size_t trail = word.size();
    while (trail > lead && is_ascii_punct(word[trail - 1])) --trail;
    out.push_back({word.substr(0, lead), word.substr(lead, trail - lead), word.substr(trail)});
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    if (!out.empty()) out.push_back(' ');
    out += c.text();
  }
  return out;
}

std::vector<std::string> split_words(const std::string& key) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < key.size()) {
    std::size_t end = key.find(' ', start);
    if (end == std::string::npos) end = key.size();
    words.push_back(key.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

// Length in chunks of the lexicon entry matching at position i, choosing the
// longest match. Interior chunks of a multi-word match may not carry
// punctuation between the words.
std::size_t match_at(const std::vector<Chunk>& chunks, std::size_t i,
                     const std::map<std::string, std::string>& entries, std::string* key_out) {
  std::size_t best = 0;
  for (const auto& [key, _] : entries) {
    auto words = split_words(key);
    if (words.size() <= best || i + words.size() > chunks.size()) continue;
    bool ok = true;
    for (std::size_t w = 0; w < words.size() && ok; ++w) {
      const Chunk& c = chunks[i + w];
      ok = ascii_lower(c.core) == words[w];
      if (ok && w > 0 && !c.lead.empty()) ok = false;
      if (ok && w + 1 < words.size() && !c.trail.empty()) ok = false;
    }
    if (ok) {
      best = words.size();
      *key_out = key;
    }
  }
  return best;
}

bool ends_with_ci(const std::string& text, const std::string& suffix) {
  if (suffix.size() > text.size()) return false;
  return ascii_lower(text.substr(text.size() - suffix.size())) == ascii_lower(suffix);
}

std::string expand_abbreviations(const std::string& sentence, const GuidelineLexicon& lexicon) {
  if (lexicon.abbreviations.empty()) return textproc::collapse_whitespace(sentence);
  auto chunks = chunk(sentence);
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < chunks.size();) {
    std::string key;
    std::size_t len = match_at(chunks, i, lexicon.abbreviations, &key);
    if (len == 0) {
      out.push_back(chunks[i++]);
      continue;
    }
    const std::string& long_form = lexicon.abbreviations.at(key);
    Chunk merged{chunks[i].lead, long_form, chunks[i + len - 1].trail};
    // "atrial fibrillation (AF)" introduces the short form; drop the
    // parenthetical instead of repeating the long form.
    if (merged.lead == "(" && !merged.trail.empty() && merged.trail.front() == ')' &&
        ends_with_ci(join(out), long_form)) {
      std::string rest = merged.trail.substr(1);
      if (!out.empty()) out.back().trail += rest;
      i += len;
      continue;
    }
    out.push_back(std::move(merged));
    i += len;
  }
  return join(out);
}

// When the text right after the term already reads "(gloss)", returns the
// number of chunks the gloss spans; otherwise 0.
std::size_t existing_gloss_span(const std::vector<Chunk>& chunks, std::size_t i, std::size_t len,
                                const std::string& gloss) {
  const Chunk& last = chunks[i + len - 1];
  if (!last.trail.empty() || i + len >= chunks.size()) return 0;
  const std::size_t span = split_words(textproc::collapse_whitespace(gloss)).size();
  if (i + len + span > chunks.size()) return 0;
  std::string after;
  for (std::size_t k = i + len; k < i + len + span; ++k) {
    if (!after.empty()) after.push_back(' ');
    after += chunks[k].text();
  }
  std::string want = "(" + ascii_lower(textproc::collapse_whitespace(gloss)) + ")";
  return ascii_lower(after).rfind(want, 0) == 0 ? span : 0;
}

std::string gloss_first_mentions(const std::string& sentence, const GuidelineLexicon& lexicon,
                                 MentionState& state) {
  if (lexicon.jargon_glosses.empty()) return sentence;
  auto chunks = chunk(sentence);
  for (std::size_t i = 0; i < chunks.size();) {
    std::string key;
    std::size_t len = match_at(chunks, i, lexicon.jargon_glosses, &key);
    if (len == 0) {
      ++i;
      continue;
    }
    const std::string& gloss = lexicon.jargon_glosses.at(key);
    std::size_t existing = existing_gloss_span(chunks, i, len, gloss);
    if (!state.contains(key)) {
      state.insert(key);
      if (existing == 0) chunks[i + len - 1].core += " (" + gloss + ")";
    }
    i += len + existing;
  }
  return join(chunks);
}

bool has_word_character(const std::string& text) {
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) return true;
  }
  return false;
}

}  // namespace

std::string strip_statistics(const std::string& sentence) {
  using std::regex;
  static const auto flags = regex::ECMAScript | regex::icase;
  static const std::vector<regex> patterns = {
      // p-values: p<0.05, P = .001, p≤0.01, p-value of 0.03
      regex(R"((^|[^A-Za-z0-9])p(?:[- ]?values?)?\s*(?:<=|>=|<|>|=|≤|≥|of|was)\s*(?:0|[1-9]\d*)?\.?\d+(?:e-?\d+)?)", flags),
      // confidence intervals: 95% CI 1.2-3.4, 95% confidence interval: 0.8 to 1.1, (95% CI)
      regex(R"((^|[^A-Za-z0-9])(?:\d+(?:\.\d+)?\s*%\s*)?(?:ci|confidence intervals?)\s*[:=,]?\s*)"
            R"((?:\[\s*-?\d+(?:\.\d+)?\s*(?:-|–|to|,)\s*-?\d+(?:\.\d+)?\s*\])"
            R"(|\(\s*-?\d+(?:\.\d+)?\s*(?:-|–|to|,)\s*-?\d+(?:\.\d+)?\s*\))"
            R"(|-?\d+(?:\.\d+)?\s*(?:-|–|to|,)\s*-?\d+(?:\.\d+)?))", flags),
      regex(R"((^|[^A-Za-z0-9])\d+(?:\.\d+)?\s*%\s*(?:ci|confidence intervals?)\b)", flags),
      // sample sizes: n = 120, N=1,024
      regex(R"((^|[^A-Za-z0-9])n\s*=\s*\d+(?:,\d{3})*)", flags),
  };

  std::string text = sentence;
  bool removed = false;
  for (const auto& re : patterns) {
    std::string next = std::regex_replace(text, re, "$1");
    if (next != text) {
      removed = true;
      text = std::move(next);
    }
  }
  if (!removed) return sentence;

  static const std::vector<std::pair<regex, std::string>> cleanup = {
      {regex(R"(\s*[(\[]\s*(?:[,;:]\s*)*[)\]])"), ""},  // emptied parenthetical
      {regex(R"(([(\[])\s*[,;:]\s*)"), "$1"},
      {regex(R"(\s*[,;:]\s*([)\]]))"), "$1"},
      {regex(R"(([,;:])(?:\s*[,;:])+)"), "$1"},
      {regex(R"(\s*[,;:]\s*([.!?])$)"), "$1"},
      {regex(R"(\s+([,;:.!?)\]]))"), "$1"},
      {regex(R"(^\s*[,;:]\s*)"), ""},
  };
  std::string prev;
  while (prev != text) {
    prev = text;
    for (const auto& [re, repl] : cleanup) text = std::regex_replace(text, re, repl);
  }
  return textproc::collapse_whitespace(text);
}

RuleOutput rule_based_adapt(const std::string& sentence, const GuidelineLexicon& lexicon,
                            MentionState mention_state) {
  std::string text = expand_abbreviations(sentence, lexicon);
  text = gloss_first_mentions(text, lexicon, mention_state);
  text = strip_statistics(text);
  RuleOutput out;
  out.mention_state = std::move(mention_state);
  if (has_word_character(text)) out.output_sentences.push_back(textproc::collapse_whitespace(text));
  return out;
}

}  // namespace plaba::adapt
