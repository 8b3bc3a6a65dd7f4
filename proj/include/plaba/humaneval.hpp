#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plaba/corpus.hpp"

namespace plaba::humaneval {

enum class Axis {
  kSentenceSimplicity,
  kTermSimplicity,
  kTermAccuracy,
  kFluency,
  kFaithfulness,
  kCompleteness,
};

enum class AxisGroup { kSimplicity, kAccuracy };

inline constexpr std::array<Axis, 6> kAllAxes = {
    Axis::kSentenceSimplicity, Axis::kTermSimplicity, Axis::kTermAccuracy,
    Axis::kFluency,            Axis::kFaithfulness,   Axis::kCompleteness,
};
inline constexpr std::array<Axis, 4> kSimplicityAxes = {
    Axis::kSentenceSimplicity, Axis::kTermSimplicity, Axis::kTermAccuracy, Axis::kFluency};
inline constexpr std::array<Axis, 2> kAccuracyAxes = {Axis::kFaithfulness, Axis::kCompleteness};

constexpr AxisGroup group_of(Axis axis) {
  return axis == Axis::kFaithfulness || axis == Axis::kCompleteness ? AxisGroup::kAccuracy
                                                                    : AxisGroup::kSimplicity;
}

std::string axis_name(Axis axis);
Axis parse_axis(const std::string& name);
std::string group_name(AxisGroup group);
// Annotator-facing description of what the axis measures.
std::string axis_help(Axis axis);

struct Judgment {
  std::string id;
  std::string annotator_id;
  std::string system_id;
  std::string abstract_id;
  std::size_t sentence_index = 0;
  Axis axis = Axis::kSentenceSimplicity;
  int raw = 0;  // -1, 0 or 1
  std::string timestamp;

  // Throws ValidationError for raw outside {-1,0,1} or an empty id.
  void validate() const;
  bool operator==(const Judgment&) const = default;
};

struct PreferenceRanking {
  std::string annotator_id;
  std::string abstract_id;
  std::vector<std::string> ordered_systems;  // best first

  void validate() const;
  bool operator==(const PreferenceRanking&) const = default;
};

// An annotator's choice of up to three question-relevant sentences of an
// abstract; those sentences are then judged on the accuracy axes.
struct AccuracySelection {
  std::string annotator_id;
  std::string abstract_id;
  std::vector<std::size_t> sentence_indices;

  void validate() const;
  bool operator==(const AccuracySelection&) const = default;
};

inline constexpr std::size_t kMaxAccuracySentences = 3;

nlohmann::json judgment_to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& doc);
nlohmann::json ranking_to_json(const PreferenceRanking& r);
PreferenceRanking ranking_from_json(const nlohmann::json& doc);
nlohmann::json selection_to_json(const AccuracySelection& s);
AccuracySelection selection_from_json(const nlohmann::json& doc);

std::vector<Judgment> load_judgments(const std::filesystem::path& path);
std::vector<PreferenceRanking> load_rankings(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sampling

struct EvalSample {
  std::string question_id;
  std::string abstract_id;
  std::vector<std::size_t> simplicity_sentences;
  // Filled in by annotators; empty when sampled.
  std::vector<std::size_t> accuracy_sentences;

  bool operator==(const EvalSample&) const = default;
};

struct SamplingPreset {
  std::string name;
  std::size_t n_questions = 0;  // 0 = every listed question
  std::size_t abstracts_per_question = 1;
};

// External protocol: one abstract for each of 40 questions.
SamplingPreset external_preset();
// Internal protocol: five questions, two abstracts each.
SamplingPreset internal_preset();
SamplingPreset parse_preset(const std::string& name);

// Seeded uniform choice of `abstracts_per_question` abstracts per question.
// An empty `question_ids` means every question in the corpus. When the
// preset caps the question count, that many questions are drawn first.
std::vector<EvalSample> sample_for_evaluation(const corpus::Corpus& corpus,
                                              std::vector<std::string> question_ids,
                                              std::uint64_t seed,
                                              const SamplingPreset& preset = external_preset());

nlohmann::json samples_to_json(const std::vector<EvalSample>& samples, std::uint64_t seed);
std::vector<EvalSample> samples_from_json(const nlohmann::json& doc);
std::vector<EvalSample> load_samples(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scoring

// Affine map of a mean raw score in [-1, 1] onto [1, 100]:
// 50.5 + 49.5 * mean_raw. Throws ValidationError outside [-1, 1].
double transform_score(double mean_raw);

struct AxisScore {
  std::size_t n_judgments = 0;
  std::size_t n_sentences = 0;
  double mean_raw = 0;
  double scaled = 0;
};

struct SystemAxisReport {
  std::string system_id;
  std::map<Axis, AxisScore> axes;          // absent axis = not judged
  std::map<AxisGroup, double> groups;      // unweighted mean of present axes
  std::map<AxisGroup, std::size_t> coverage;  // distinct sentences judged per group
};

struct AxisReport {
  std::vector<SystemAxisReport> systems;  // sorted by system id
  const SystemAxisReport* find(const std::string& system_id) const;
};

AxisReport aggregate_axes(const std::vector<Judgment>& judgments);

struct SystemPreference {
  std::string system_id;
  std::size_t first_preferences = 0;
  double mean_rank = 0;
  std::size_t rank_sum = 0;
  std::size_t overall_rank = 0;
};

// Orders systems by first-preference count, then mean rank, then id.
// Throws ValidationError when rankings disagree on the system set.
std::vector<SystemPreference> tally_preferences(const std::vector<PreferenceRanking>& rankings);

struct HumanReport {
  AxisReport axes;
  std::vector<SystemPreference> preferences;
};

nlohmann::json human_report_to_json(const HumanReport& report);

// Rows are systems, then top and median rows; columns are the six axes, the
// two group means and the first-preference count.
std::string format_human_table(const HumanReport& report);

}  // namespace plaba::humaneval
