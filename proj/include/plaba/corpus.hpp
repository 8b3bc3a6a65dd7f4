#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace plaba::corpus {

struct ConsumerQuestion {
  std::string id;
  std::string text;
  std::vector<std::string> focus_terms;

  bool operator==(const ConsumerQuestion&) const = default;
};

struct SourceAbstract {
  std::string id;
  std::string question_id;
  std::vector<std::string> sentences;

  bool operator==(const SourceAbstract&) const = default;
};

// alignment[i] holds the adapted sentences for source sentence i; an empty
// list means the source sentence was dropped.
struct Adaptation {
  std::string id;
  std::string abstract_id;
  std::string annotator_id;
  std::vector<std::vector<std::string>> alignment;

  // Inner sentences joined by single spaces; "" when dropped.
  std::string target_text(std::size_t sentence_index) const;

  bool operator==(const Adaptation&) const = default;
};

struct SentencePair {
  std::string question_id;
  std::string abstract_id;
  std::string adaptation_id;
  std::size_t sentence_index = 0;
  std::string source_text;
  std::string target_text;

  bool operator==(const SentencePair&) const = default;
};

struct CorpusStats {
  std::size_t n_questions = 0;
  std::size_t n_abstracts = 0;
  std::size_t n_adaptations = 0;
  std::size_t n_multi_adapted = 0;
  std::size_t n_pairs = 0;

  bool operator==(const CorpusStats&) const = default;
};

// Validated, immutable PLABA-style corpus. Construction checks every
// structural invariant and throws ValidationError naming the offending record.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<ConsumerQuestion> questions, std::vector<SourceAbstract> abstracts,
         std::vector<Adaptation> adaptations);

  const std::vector<ConsumerQuestion>& questions() const { return questions_; }
  const std::vector<SourceAbstract>& abstracts() const { return abstracts_; }
  const std::vector<Adaptation>& adaptations() const { return adaptations_; }

  const ConsumerQuestion* find_question(const std::string& id) const;
  const SourceAbstract* find_abstract(const std::string& id) const;
  const ConsumerQuestion& question_of(const SourceAbstract& abstract) const;

  // Adaptations of one abstract, ordered by adaptation id.
  std::vector<const Adaptation*> adaptations_of(const std::string& abstract_id) const;

  // Abstract ids belonging to one question, sorted.
  std::vector<std::string> abstracts_of(const std::string& question_id) const;

  bool operator==(const Corpus& other) const {
    return questions_ == other.questions_ && abstracts_ == other.abstracts_ &&
           adaptations_ == other.adaptations_;
  }

 private:
  std::vector<ConsumerQuestion> questions_;
  std::vector<SourceAbstract> abstracts_;
  std::vector<Adaptation> adaptations_;
  std::map<std::string, std::size_t> question_index_;
  std::map<std::string, std::size_t> abstract_index_;
  std::map<std::string, std::vector<std::size_t>> adaptations_by_abstract_;
};

Corpus corpus_from_json(const nlohmann::json& doc);
nlohmann::json corpus_to_json(const Corpus& corpus);

// Throws IoError for unreadable files, ValidationError for malformed content.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

enum class DropPolicy { kKeepEmpty, kExcludeDropped };

DropPolicy parse_drop_policy(const std::string& name);

// Ordered by (question_id, abstract_id, adaptation_id, sentence_index).
std::vector<SentencePair> build_sentence_pairs(const Corpus& corpus,
                                               DropPolicy policy = DropPolicy::kKeepEmpty);

nlohmann::json pair_to_json(const SentencePair& pair);

CorpusStats corpus_stats(const Corpus& corpus);
nlohmann::json stats_to_json(const CorpusStats& stats);

// ---------------------------------------------------------------------------
// Splits

enum class Section { kTrain, kValidation, kTest };

Section parse_section(const std::string& name);
std::string section_name(Section section);

struct CorpusSplit {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  const std::vector<std::string>& section(Section s) const;
  bool operator==(const CorpusSplit&) const = default;
};

// Shuffles the sorted abstract ids with a seeded permutation, then cuts at
// floor(r0*N) and floor((r0+r1)*N); the remainder is the test set.
CorpusSplit split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed);

// Cut points for N items; exposed for the size property tests.
std::pair<std::size_t, std::size_t> split_boundaries(std::size_t n,
                                                     const std::array<double, 3>& ratios);

std::array<double, 3> parse_ratios(const std::string& text);

nlohmann::json split_to_json(const CorpusSplit& split);
CorpusSplit split_from_json(const nlohmann::json& doc);
CorpusSplit load_split(const std::filesystem::path& path);

// Checks that the split partitions exactly the corpus's abstract ids.
void validate_split(const CorpusSplit& split, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Import of the PLABA distribution layout:
//
//   { "<question id>": {
//       "question": "...",
//       "focus": ["..."]                                  (optional)
//       "abstracts": {
//         "<pmid>": {
//           "abstract": {"1": "sentence", "2": ...} | "raw text",
//           "adaptations": {"<annotator>": {"1": "adapted text", ...}}
//         } } } }
//
// Numbered keys are sorted numerically. A raw-text abstract is segmented with
// textproc::split_sentences. An adapted cell that is empty or missing marks a
// dropped sentence; a cell holding several sentences is split into the list.
Corpus import_plaba(const nlohmann::json& doc, const std::set<std::string>& abbreviations);
Corpus import_plaba_file(const std::filesystem::path& path,
                         const std::set<std::string>& abbreviations);

}  // namespace plaba::corpus
