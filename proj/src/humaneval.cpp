#include "plaba/humaneval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

#include "plaba/error.hpp"
#include "plaba/util.hpp"

namespace plaba::humaneval {

using nlohmann::json;

std::string axis_name(Axis axis) {
  switch (axis) {
    case Axis::kSentenceSimplicity: return "sentence_simplicity";
    case Axis::kTermSimplicity: return "term_simplicity";
    case Axis::kTermAccuracy: return "term_accuracy";
    case Axis::kFluency: return "fluency";
    case Axis::kFaithfulness: return "faithfulness";
    case Axis::kCompleteness: return "completeness";
  }
  return "?";
}

Axis parse_axis(const std::string& name) {
  for (Axis a : kAllAxes) {
    if (axis_name(a) == name) return a;
  }
  throw ValidationError("unknown axis: " + name);
}

std::string group_name(AxisGroup group) {
  return group == AxisGroup::kSimplicity ? "simplicity" : "accuracy";
}

std::string axis_help(Axis axis) {
  switch (axis) {
    case Axis::kSentenceSimplicity:
      return "Is the sentence easy to read for a reader with an eighth-grade education? "
             "-1 harder than the source, 0 no easier, +1 simpler.";
    case Axis::kTermSimplicity:
      return "Are technical terms replaced or explained in plain words? "
             "-1 new unexplained jargon, 0 unchanged, +1 jargon handled.";
    case Axis::kTermAccuracy:
      return "Are the substituted or explained terms medically correct? "
             "-1 wrong, 0 partly correct, +1 correct.";
    case Axis::kFluency:
      return "Is the sentence grammatical and natural? -1 broken, 0 awkward, +1 fluent.";
    case Axis::kFaithfulness:
      return "Does the adaptation keep the meaning of the source without adding claims? "
             "-1 contradicts or invents, 0 minor drift, +1 faithful.";
    case Axis::kCompleteness:
      return "Does the adaptation keep the information relevant to the question? "
             "-1 key content lost, 0 some lost, +1 complete.";
  }
  return "";
}

void Judgment::validate() const {
  if (id.empty()) throw ValidationError("judgment without id");
  if (raw < -1 || raw > 1) {
    throw ValidationError("judgment " + id + ": raw score must be -1, 0 or 1 (got " +
                          std::to_string(raw) + ")");
  }
  if (annotator_id.empty() || system_id.empty() || abstract_id.empty()) {
    throw ValidationError("judgment " + id + ": missing annotator, system or abstract");
  }
}

void PreferenceRanking::validate() const {
  if (annotator_id.empty() || abstract_id.empty()) {
    throw ValidationError("ranking without annotator or abstract");
  }
  if (ordered_systems.empty()) throw ValidationError("ranking for " + abstract_id + " is empty");
  std::set<std::string> seen(ordered_systems.begin(), ordered_systems.end());
  if (seen.size() != ordered_systems.size()) {
    throw ValidationError("ranking for " + abstract_id + " lists a system twice");
  }
}

void AccuracySelection::validate() const {
  if (annotator_id.empty() || abstract_id.empty()) {
    throw ValidationError("accuracy selection without annotator or abstract");
  }
  if (sentence_indices.size() > kMaxAccuracySentences) {
    throw ValidationError("accuracy selection allows up to 3 sentences (got " +
                          std::to_string(sentence_indices.size()) + ")");
  }
  std::set<std::size_t> seen(sentence_indices.begin(), sentence_indices.end());
  if (seen.size() != sentence_indices.size()) {
    throw ValidationError("accuracy selection lists a sentence twice");
  }
}

json judgment_to_json(const Judgment& j) {
  return {{"id", j.id},
          {"annotator_id", j.annotator_id},
          {"system_id", j.system_id},
          {"abstract_id", j.abstract_id},
          {"sentence_index", j.sentence_index},
          {"axis", axis_name(j.axis)},
          {"raw", j.raw},
          {"timestamp", j.timestamp}};
}

Judgment judgment_from_json(const json& doc) {
  Judgment j;
  try {
    j.id = doc.at("id").get<std::string>();
    j.annotator_id = doc.at("annotator_id").get<std::string>();
    j.system_id = doc.at("system_id").get<std::string>();
    j.abstract_id = doc.at("abstract_id").get<std::string>();
    j.sentence_index = doc.at("sentence_index").get<std::size_t>();
    j.axis = parse_axis(doc.at("axis").get<std::string>());
    j.raw = doc.at("raw").get<int>();
    j.timestamp = doc.value("timestamp", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed judgment: ") + e.what());
  }
  j.validate();
  return j;
}

json ranking_to_json(const PreferenceRanking& r) {
  return {{"annotator_id", r.annotator_id},
          {"abstract_id", r.abstract_id},
          {"ordered_systems", r.ordered_systems}};
}

PreferenceRanking ranking_from_json(const json& doc) {
  PreferenceRanking r;
  try {
    r.annotator_id = doc.at("annotator_id").get<std::string>();
    r.abstract_id = doc.at("abstract_id").get<std::string>();
    r.ordered_systems = doc.at("ordered_systems").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ranking: ") + e.what());
  }
  r.validate();
  return r;
}

json selection_to_json(const AccuracySelection& s) {
  return {{"annotator_id", s.annotator_id},
          {"abstract_id", s.abstract_id},
          {"sentence_indices", s.sentence_indices}};
}

AccuracySelection selection_from_json(const json& doc) {
  AccuracySelection s;
  try {
    s.annotator_id = doc.at("annotator_id").get<std::string>();
    s.abstract_id = doc.at("abstract_id").get<std::string>();
    s.sentence_indices = doc.at("sentence_indices").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed accuracy selection: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

template <typename T, typename Parse>
std::vector<T> load_jsonl(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
  return load_jsonl<Judgment>(path, judgment_from_json);
}

std::vector<PreferenceRanking> load_rankings(const std::filesystem::path& path) {
  return load_jsonl<PreferenceRanking>(path, ranking_from_json);
}

// ---------------------------------------------------------------------------

SamplingPreset external_preset() { return {"external", 40, 1}; }
SamplingPreset internal_preset() { return {"internal", 5, 2}; }

SamplingPreset parse_preset(const std::string& name) {
  if (name == "external") return external_preset();
  if (name == "internal") return internal_preset();
  if (name == "all") return {"all", 0, 1};
  throw ValidationError("unknown sampling preset: " + name + " (expected external|internal|all)");
}

std::vector<EvalSample> sample_for_evaluation(const corpus::Corpus& corpus,
                                              std::vector<std::string> question_ids,
                                              std::uint64_t seed, const SamplingPreset& preset) {
  if (question_ids.empty()) {
    for (const auto& q : corpus.questions()) question_ids.push_back(q.id);
    std::sort(question_ids.begin(), question_ids.end());
  }
  for (const auto& qid : question_ids) {
    if (!corpus.find_question(qid)) throw ValidationError("unknown question " + qid);
    if (corpus.abstracts_of(qid).empty()) {
      throw ValidationError("question " + qid + " has no abstracts to sample");
    }
  }
  SeededRng rng(seed);
  if (preset.n_questions > 0) {
    if (question_ids.size() < preset.n_questions) {
      throw ValidationError("preset " + preset.name + " needs " +
                            std::to_string(preset.n_questions) + " questions, only " +
                            std::to_string(question_ids.size()) + " available");
    }
    rng.shuffle(question_ids);
    question_ids.resize(preset.n_questions);
    std::sort(question_ids.begin(), question_ids.end());
  }

  std::vector<EvalSample> out;
  for (const auto& qid : question_ids) {
    auto abstracts = corpus.abstracts_of(qid);
    const std::size_t take = std::min(std::max<std::size_t>(preset.abstracts_per_question, 1),
                                      abstracts.size());
    // Partial Fisher-Yates: the first `take` slots are a uniform draw.
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(abstracts.size() - i));
      std::swap(abstracts[i], abstracts[j]);
    }
    abstracts.resize(take);
    std::sort(abstracts.begin(), abstracts.end());
    for (const auto& aid : abstracts) {
      EvalSample s{qid, aid, {}, {}};
      const auto* a = corpus.find_abstract(aid);
      for (std::size_t k = 0; k < a->sentences.size(); ++k) s.simplicity_sentences.push_back(k);
      out.push_back(std::move(s));
    }
  }
  return out;
}

json samples_to_json(const std::vector<EvalSample>& samples, std::uint64_t seed) {
  json items = json::array();
  for (const auto& s : samples) {
    items.push_back({{"question_id", s.question_id},
                     {"abstract_id", s.abstract_id},
                     {"simplicity_sentences", s.simplicity_sentences},
                     {"accuracy_sentences", s.accuracy_sentences}});
  }
  return {{"seed", seed}, {"samples", items}};
}

std::vector<EvalSample> samples_from_json(const json& doc) {
  std::vector<EvalSample> out;
  try {
    for (const auto& item : doc.at("samples")) {
      EvalSample s;
      s.question_id = item.at("question_id").get<std::string>();
      s.abstract_id = item.at("abstract_id").get<std::string>();
      s.simplicity_sentences = item.at("simplicity_sentences").get<std::vector<std::size_t>>();
      s.accuracy_sentences = item.value("accuracy_sentences", std::vector<std::size_t>{});
      if (s.accuracy_sentences.size() > kMaxAccuracySentences) {
        throw ValidationError("sample " + s.abstract_id + ": more than 3 accuracy sentences");
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed evaluation sample: ") + e.what());
  }
  return out;
}

std::vector<EvalSample> load_samples(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return samples_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double transform_score(double mean_raw) {
  if (!(mean_raw >= -1.0 && mean_raw <= 1.0)) {
    throw ValidationError("mean raw score must lie in [-1, 1]");
  }
  return 50.5 + 49.5 * mean_raw;
}

const SystemAxisReport* AxisReport::find(const std::string& system_id) const {
  for (const auto& s : systems) {
    if (s.system_id == system_id) return &s;
  }
  return nullptr;
}

AxisReport aggregate_axes(const std::vector<Judgment>& judgments) {
  struct Acc {
    long sum = 0;
    std::size_t n = 0;
    std::set<std::pair<std::string, std::size_t>> sentences;
  };
  std::map<std::string, std::map<Axis, Acc>> acc;
  std::map<std::string, std::map<AxisGroup, std::set<std::pair<std::string, std::size_t>>>> cover;
  for (const auto& j : judgments) {
    j.validate();
    auto& a = acc[j.system_id][j.axis];
    a.sum += j.raw;
    ++a.n;
    a.sentences.emplace(j.abstract_id, j.sentence_index);
    cover[j.system_id][group_of(j.axis)].emplace(j.abstract_id, j.sentence_index);
  }

  AxisReport report;
  for (const auto& [system, axes] : acc) {
    SystemAxisReport s;
    s.system_id = system;
    std::map<AxisGroup, std::pair<double, std::size_t>> group_sums;
    for (const auto& [axis, a] : axes) {
      AxisScore score;
      score.n_judgments = a.n;
      score.n_sentences = a.sentences.size();
      score.mean_raw = static_cast<double>(a.sum) / static_cast<double>(a.n);
      score.scaled = transform_score(score.mean_raw);
      s.axes[axis] = score;
      auto& g = group_sums[group_of(axis)];
      g.first += score.scaled;
      ++g.second;
    }
    for (const auto& [group, g] : group_sums) {
      s.groups[group] = g.first / static_cast<double>(g.second);
    }
    for (const auto& [group, sentences] : cover[system]) s.coverage[group] = sentences.size();
    report.systems.push_back(std::move(s));
  }
  return report;
}

std::vector<SystemPreference> tally_preferences(const std::vector<PreferenceRanking>& rankings) {
  if (rankings.empty()) return {};
  const std::set<std::string> systems(rankings.front().ordered_systems.begin(),
                                      rankings.front().ordered_systems.end());
  std::map<std::string, SystemPreference> tally;
  for (const auto& id : systems) tally[id].system_id = id;
  for (const auto& r : rankings) {
    r.validate();
    if (std::set<std::string>(r.ordered_systems.begin(), r.ordered_systems.end()) != systems) {
      throw ValidationError("ranking by " + r.annotator_id + " for " + r.abstract_id +
                            " covers a different system set");
    }
    for (std::size_t pos = 0; pos < r.ordered_systems.size(); ++pos) {
      auto& t = tally[r.ordered_systems[pos]];
      t.rank_sum += pos + 1;
      if (pos == 0) ++t.first_preferences;
    }
  }
  std::vector<SystemPreference> out;
  for (auto& [_, t] : tally) {
    t.mean_rank = static_cast<double>(t.rank_sum) / static_cast<double>(rankings.size());
    out.push_back(t);
  }
  // Every system appears in every ranking, so rank sums compare exactly.
  std::sort(out.begin(), out.end(), [](const SystemPreference& a, const SystemPreference& b) {
    if (a.first_preferences != b.first_preferences) return a.first_preferences > b.first_preferences;
    if (a.rank_sum != b.rank_sum) return a.rank_sum < b.rank_sum;
    return a.system_id < b.system_id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].overall_rank = i + 1;
  return out;
}

json human_report_to_json(const HumanReport& report) {
  json systems = json::array();
  for (const auto& s : report.axes.systems) {
    json axes = json::object();
    for (const auto& [axis, score] : s.axes) {
      axes[axis_name(axis)] = {{"n_judgments", score.n_judgments},
                               {"n_sentences", score.n_sentences},
                               {"mean_raw", score.mean_raw},
                               {"scaled", score.scaled}};
    }
    json groups = json::object();
    for (const auto& [group, value] : s.groups) groups[group_name(group)] = value;
    json coverage = json::object();
    for (const auto& [group, n] : s.coverage) coverage[group_name(group)] = n;
    systems.push_back(
        {{"system_id", s.system_id}, {"axes", axes}, {"groups", groups}, {"coverage", coverage}});
  }
  json prefs = json::array();
  for (const auto& p : report.preferences) {
    prefs.push_back({{"system_id", p.system_id},
                     {"first_preferences", p.first_preferences},
                     {"mean_rank", p.mean_rank},
                     {"overall_rank", p.overall_rank}});
  }
  return {{"systems", systems}, {"preferences", prefs}};
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

std::string format_human_table(const HumanReport& report) {
  std::set<std::string> ids;
  for (const auto& s : report.axes.systems) ids.insert(s.system_id);
  for (const auto& p : report.preferences) ids.insert(p.system_id);

  // Column order: six axes, two groups, first preferences.
  constexpr std::size_t kCols = 9;
  std::vector<std::string> headers;
  for (Axis a : kAllAxes) headers.push_back(axis_name(a));
  headers.push_back("simplicity");
  headers.push_back("accuracy");
  headers.push_back("first_pref");

  std::vector<std::pair<std::string, std::array<std::optional<double>, kCols>>> rows;
  for (const auto& id : ids) {
    std::array<std::optional<double>, kCols> row{};
    if (const auto* s = report.axes.find(id)) {
      for (std::size_t c = 0; c < kAllAxes.size(); ++c) {
        auto it = s->axes.find(kAllAxes[c]);
        if (it != s->axes.end()) row[c] = it->second.scaled;
      }
      if (auto it = s->groups.find(AxisGroup::kSimplicity); it != s->groups.end()) row[6] = it->second;
      if (auto it = s->groups.find(AxisGroup::kAccuracy); it != s->groups.end()) row[7] = it->second;
    }
    for (const auto& p : report.preferences) {
      if (p.system_id == id) row[8] = static_cast<double>(p.first_preferences);
    }
    rows.emplace_back(id, row);
  }
  std::array<std::optional<double>, kCols> top{}, med{};
  for (std::size_t c = 0; c < kCols; ++c) {
    std::vector<double> col;
    for (const auto& [_, row] : rows) {
      if (row[c]) col.push_back(*row[c]);
    }
    if (!col.empty()) {
      top[c] = *std::max_element(col.begin(), col.end());
      med[c] = median(col);
    }
  }
  rows.emplace_back("top", top);
  rows.emplace_back("median", med);

  std::size_t width = 6;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), "system");
  out += buf;
  for (const auto& h : headers) {
    std::snprintf(buf, sizeof buf, "  %*s", static_cast<int>(std::max<std::size_t>(h.size(), 7)), h.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& [name, row] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), name.c_str());
    out += buf;
    for (std::size_t c = 0; c < kCols; ++c) {
      int w = static_cast<int>(std::max<std::size_t>(headers[c].size(), 7));
      if (!row[c]) {
        std::snprintf(buf, sizeof buf, "  %*s", w, "-");
      } else if (c == 8) {
        std::snprintf(buf, sizeof buf, "  %*.0f", w, *row[c]);
      } else {
        std::snprintf(buf, sizeof buf, "  %*.2f", w, *row[c]);
      }
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace plaba::humaneval
