#include <algorithm>

#include "plaba/server.hpp"
#include "plaba/util.hpp"

namespace plaba::server {

using humaneval::Axis;
using nlohmann::json;

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kAxisJudgment: return "axis_judgment";
    case TaskKind::kPreferenceRanking: return "preference_ranking";
    case TaskKind::kAccuracySelection: return "accuracy_selection";
  }
  return "?";
}

namespace {

std::string label_for(std::size_t i) {
  std::string label;
  do {
    label.insert(label.begin(), static_cast<char>('A' + i % 26));
    i = i / 26;
  } while (i-- > 0);
  return label;
}

template <typename T>
T field(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(std::string("missing field \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("bad type for field \"") + key + "\"");
  }
}

}  // namespace

JudgmentSubmission judgment_submission_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("judgment body must be a JSON object");
  JudgmentSubmission s;
  s.id = field<std::string>(doc, "id");
  s.annotator_id = field<std::string>(doc, "annotator_id");
  s.task_id = field<std::string>(doc, "task_id");
  s.candidate = field<std::string>(doc, "candidate");
  s.axis = field<std::string>(doc, "axis");
  const auto& raw = doc.find("raw");
  if (raw == doc.end() || !raw->is_number_integer()) {
    throw ValidationError("raw score must be the integer -1, 0 or 1");
  }
  s.raw = raw->get<int>();
  return s;
}

RankingSubmission ranking_submission_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("ranking body must be a JSON object");
  return {field<std::string>(doc, "annotator_id"), field<std::string>(doc, "task_id"),
          field<std::vector<std::string>>(doc, "ordered_labels")};
}

SelectionSubmission selection_submission_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("selection body must be a JSON object");
  return {field<std::string>(doc, "annotator_id"), field<std::string>(doc, "task_id"),
          field<std::vector<std::size_t>>(doc, "sentence_indices")};
}

EvaluationService::EvaluationService(const corpus::Corpus& corpus, SessionConfig config,
                                     const std::filesystem::path& data_dir)
    : corpus_(corpus), config_(std::move(config)), store_(data_dir) {
  if (config_.annotators.empty()) throw ValidationError("session needs at least one annotator");
  annotators_.insert(config_.annotators.begin(), config_.annotators.end());

  for (const auto& run : config_.runs) {
    if (run.empty()) throw ValidationError("empty prediction run");
    const std::string& system = run.front().system_id;
    if (std::find(systems_.begin(), systems_.end(), system) != systems_.end()) {
      throw ValidationError("system " + system + " supplied twice");
    }
    systems_.push_back(system);
    for (const auto& rec : run) {
      if (rec.system_id != system) {
        throw ValidationError("prediction run mixes systems " + system + " and " + rec.system_id);
      }
      predictions_[{system, rec.abstract_id, rec.sentence_index}] = &rec;
    }
  }
  if (systems_.empty()) throw ValidationError("session needs at least one prediction run");
  std::sort(systems_.begin(), systems_.end());

  std::size_t task_no = 0;
  auto add_task = [&](std::string id, TaskKind kind, std::size_t sample, std::size_t sentence) {
    std::vector<std::string> order = systems_;
    SeededRng rng(mix_seed(config_.seed, task_no++));
    rng.shuffle(order);
    if (!task_index_.emplace(id, tasks_.size()).second) {
      throw ValidationError("duplicate task " + id + " (abstract sampled twice?)");
    }
    tasks_.push_back({std::move(id), kind, sample, sentence, std::move(order)});
  };
  for (std::size_t si = 0; si < config_.samples.size(); ++si) {
    const auto& sample = config_.samples[si];
    const auto* abstract = corpus_.find_abstract(sample.abstract_id);
    if (!abstract) throw ValidationError("sample names unknown abstract " + sample.abstract_id);
    for (std::size_t k : sample.simplicity_sentences) {
      if (k >= abstract->sentences.size()) {
        throw ValidationError("sample " + sample.abstract_id + ": sentence " + std::to_string(k) +
                              " out of range");
      }
    }
    if (sample.accuracy_sentences.empty()) {
      add_task(sample.abstract_id + "/accuracy", TaskKind::kAccuracySelection, si, 0);
    }
    for (std::size_t k : sample.simplicity_sentences) {
      add_task(sample.abstract_id + "/s" + std::to_string(k), TaskKind::kAxisJudgment, si, k);
    }
    if (systems_.size() > 1) {
      add_task(sample.abstract_id + "/ranking", TaskKind::kPreferenceRanking, si, 0);
    }
  }
  write_file_atomic(data_dir / "blinding.json", blinding_json().dump(2) + "\n");
}

json EvaluationService::blinding_json() const {
  json tasks = json::object();
  for (const auto& t : tasks_) {
    json labels = json::object();
    for (std::size_t i = 0; i < t.systems.size(); ++i) labels[label_for(i)] = t.systems[i];
    tasks[t.id] = labels;
  }
  return {{"seed", config_.seed}, {"tasks", tasks}};
}

const EvaluationService::TaskDef& EvaluationService::find_task(const std::string& task_id) const {
  auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw UnknownReferenceError("unknown task " + task_id);
  return tasks_[it->second];
}

void EvaluationService::require_annotator(const std::string& annotator_id) const {
  if (!annotators_.contains(annotator_id)) {
    throw UnknownReferenceError("unknown annotator " + annotator_id);
  }
}

const PredictionRecord* EvaluationService::prediction(const std::string& system,
                                                      const std::string& abstract_id,
                                                      std::size_t sentence) const {
  auto it = predictions_.find({system, abstract_id, sentence});
  return it == predictions_.end() ? nullptr : it->second;
}

std::vector<Axis> EvaluationService::axes_for(const TaskDef& task, const std::string& annotator,
                                              const AnnotationStore::Snapshot& snap) const {
  std::vector<Axis> axes(humaneval::kSimplicityAxes.begin(), humaneval::kSimplicityAxes.end());
  const auto& sample = config_.samples[task.sample_index];
  const std::vector<std::size_t>* relevant = &sample.accuracy_sentences;
  if (relevant->empty()) {
    auto it = snap.selection_index.find({annotator, sample.abstract_id});
    relevant = it == snap.selection_index.end() ? nullptr
                                                : &snap.selections[it->second].sentence_indices;
  }
  if (relevant &&
      std::find(relevant->begin(), relevant->end(), task.sentence_index) != relevant->end()) {
    axes.insert(axes.end(), humaneval::kAccuracyAxes.begin(), humaneval::kAccuracyAxes.end());
  }
  return axes;
}

bool EvaluationService::completed(const TaskDef& task, const std::string& annotator,
                                  const AnnotationStore::Snapshot& snap) const {
  const auto& abstract_id = config_.samples[task.sample_index].abstract_id;
  switch (task.kind) {
    case TaskKind::kAccuracySelection:
      return snap.selection_index.contains({annotator, abstract_id});
    case TaskKind::kPreferenceRanking:
      return snap.ranking_index.contains({annotator, abstract_id});
    case TaskKind::kAxisJudgment:
      for (const auto& system : task.systems) {
        for (Axis axis : axes_for(task, annotator, snap)) {
          if (!snap.judged.contains({annotator, system, abstract_id, task.sentence_index, axis})) {
            return false;
          }
        }
      }
      return true;
  }
  return false;
}

TaskAssignment EvaluationService::render(const TaskDef& task, const std::string& annotator,
                                         const AnnotationStore::Snapshot& snap) const {
  const auto& sample = config_.samples[task.sample_index];
  const auto& abstract = *corpus_.find_abstract(sample.abstract_id);
  const auto& question = corpus_.question_of(abstract);

  json payload = {{"question", question.text}, {"abstract_id", abstract.id}};
  switch (task.kind) {
    case TaskKind::kAccuracySelection: {
      json sentences = json::array();
      for (std::size_t k = 0; k < abstract.sentences.size(); ++k) {
        sentences.push_back({{"index", k}, {"text", abstract.sentences[k]}});
      }
      payload["sentences"] = sentences;
      payload["max_selected"] = humaneval::kMaxAccuracySentences;
      break;
    }
    case TaskKind::kAxisJudgment: {
      payload["sentence_index"] = task.sentence_index;
      payload["source"] = abstract.sentences[task.sentence_index];
      json candidates = json::array();
      for (std::size_t i = 0; i < task.systems.size(); ++i) {
        const auto* p = prediction(task.systems[i], abstract.id, task.sentence_index);
        bool usable = p && !p->error;
        std::string text = usable ? p->candidate_text() : "";
        candidates.push_back({{"label", label_for(i)},
                              {"text", text},
                              {"dropped", usable && text.empty()},
                              {"missing", !usable}});
      }
      payload["candidates"] = candidates;
      json axes = json::array();
      for (Axis a : axes_for(task, annotator, snap)) {
        axes.push_back({{"name", humaneval::axis_name(a)},
                        {"group", humaneval::group_name(humaneval::group_of(a))},
                        {"help", humaneval::axis_help(a)}});
      }
      payload["axes"] = axes;
      payload["scale"] = {-1, 0, 1};
      break;
    }
    case TaskKind::kPreferenceRanking: {
      payload["source_sentences"] = abstract.sentences;
      json candidates = json::array();
      for (std::size_t i = 0; i < task.systems.size(); ++i) {
        json sentences = json::array();
        for (std::size_t k = 0; k < abstract.sentences.size(); ++k) {
          const auto* p = prediction(task.systems[i], abstract.id, k);
          sentences.push_back(p && !p->error ? p->candidate_text() : "");
        }
        candidates.push_back({{"label", label_for(i)}, {"sentences", sentences}});
      }
      payload["candidates"] = candidates;
      break;
    }
  }

  std::size_t done = 0;
  for (const auto& t : tasks_) done += completed(t, annotator, snap) ? 1 : 0;
  payload["progress"] = {{"completed", done}, {"total", tasks_.size()}};
  return {task.id, annotator, task.kind, std::move(payload)};
}

std::optional<TaskAssignment> EvaluationService::next_task(const std::string& annotator_id) const {
  require_annotator(annotator_id);
  auto snap = store_.snapshot();
  for (const auto& task : tasks_) {
    if (!completed(task, annotator_id, *snap)) return render(task, annotator_id, *snap);
  }
  return std::nullopt;
}

Ack EvaluationService::submit_judgment(const JudgmentSubmission& s) {
  if (s.raw < -1 || s.raw > 1) {
    throw ValidationError("raw score must be -1, 0 or 1 (got " + std::to_string(s.raw) + ")");
  }
  if (s.id.empty()) throw ValidationError("judgment needs a client-generated id");
  if (store_.snapshot()->judgment_ids.contains(s.id)) return {false, s.id};

  require_annotator(s.annotator_id);
  const TaskDef& task = find_task(s.task_id);
  if (task.kind != TaskKind::kAxisJudgment) {
    throw ValidationError("task " + task.id + " does not take axis judgments");
  }
  const Axis axis = humaneval::parse_axis(s.axis);
  auto label = std::find_if(task.systems.begin(), task.systems.end(), [&, i = std::size_t{0}](
                                                                           const auto&) mutable {
    return label_for(i++) == s.candidate;
  });
  if (label == task.systems.end()) {
    throw UnknownReferenceError("task " + task.id + " has no candidate " + s.candidate);
  }
  auto allowed = axes_for(task, s.annotator_id, *store_.snapshot());
  if (std::find(allowed.begin(), allowed.end(), axis) == allowed.end()) {
    throw ValidationError("axis " + s.axis + " is not requested for " + task.id +
                          " (accuracy axes need the sentence selected as relevant)");
  }

  humaneval::Judgment j;
  j.id = s.id;
  j.annotator_id = s.annotator_id;
  j.system_id = *label;
  j.abstract_id = config_.samples[task.sample_index].abstract_id;
  j.sentence_index = task.sentence_index;
  j.axis = axis;
  j.raw = s.raw;
  j.timestamp = utc_timestamp();
  return {store_.append(j), s.id};
}

Ack EvaluationService::submit_ranking(const RankingSubmission& s) {
  require_annotator(s.annotator_id);
  const TaskDef& task = find_task(s.task_id);
  if (task.kind != TaskKind::kPreferenceRanking) {
    throw ValidationError("task " + task.id + " does not take rankings");
  }
  if (s.ordered_labels.size() != task.systems.size()) {
    throw ValidationError("ranking must order all " + std::to_string(task.systems.size()) +
                          " candidates");
  }
  humaneval::PreferenceRanking r;
  r.annotator_id = s.annotator_id;
  r.abstract_id = config_.samples[task.sample_index].abstract_id;
  for (const auto& label : s.ordered_labels) {
    std::size_t i = 0;
    while (i < task.systems.size() && label_for(i) != label) ++i;
    if (i == task.systems.size()) throw UnknownReferenceError("unknown candidate label " + label);
    r.ordered_systems.push_back(task.systems[i]);
  }
  r.validate();
  return {store_.append(r), s.annotator_id + "/" + r.abstract_id};
}

Ack EvaluationService::submit_selection(const SelectionSubmission& s) {
  require_annotator(s.annotator_id);
  const TaskDef& task = find_task(s.task_id);
  if (task.kind != TaskKind::kAccuracySelection) {
    throw ValidationError("task " + task.id + " does not take sentence selections");
  }
  const auto& abstract_id = config_.samples[task.sample_index].abstract_id;
  const auto* abstract = corpus_.find_abstract(abstract_id);
  humaneval::AccuracySelection sel{s.annotator_id, abstract_id, s.sentence_indices};
  std::sort(sel.sentence_indices.begin(), sel.sentence_indices.end());
  sel.validate();
  for (std::size_t k : sel.sentence_indices) {
    if (k >= abstract->sentences.size()) {
      throw ValidationError("sentence " + std::to_string(k) + " is out of range for " + abstract_id);
    }
  }
  return {store_.append(sel), s.annotator_id + "/" + abstract_id};
}

json EvaluationService::session_progress() const {
  auto snap = store_.snapshot();
  json annotators = json::object();
  for (const auto& a : config_.annotators) {
    std::size_t done = 0;
    for (const auto& t : tasks_) done += completed(t, a, *snap) ? 1 : 0;
    annotators[a] = {{"completed", done}, {"total", tasks_.size()}, {"finished", done == tasks_.size()}};
  }
  return {{"n_samples", config_.samples.size()},
          {"n_tasks", tasks_.size()},
          {"n_systems", systems_.size()},
          {"n_judgments", snap->judgments.size()},
          {"n_rankings", snap->rankings.size()},
          {"n_selections", snap->selections.size()},
          {"annotators", annotators}};
}

void EvaluationService::set_automatic_reports(std::vector<metrics::MetricsReport> reports) {
  auto_reports_ = std::move(reports);
}

std::string EvaluationService::automatic_report(const std::string& system) const {
  if (auto_reports_.empty()) throw NothingToReportError("no automatic metrics report loaded");
  if (!system.empty()) {
    for (const auto& r : auto_reports_) {
      if (r.system_id == system) return metrics::report_json_text(r);
    }
    throw NothingToReportError("no automatic report for system " + system);
  }
  if (auto_reports_.size() == 1) return metrics::report_json_text(auto_reports_.front());
  json all = json::array();
  for (const auto& r : auto_reports_) all.push_back(metrics::report_to_json(r));
  return all.dump(2) + "\n";
}

humaneval::HumanReport EvaluationService::human_report() const {
  auto snap = store_.snapshot();
  if (snap->judgments.empty() && snap->rankings.empty()) {
    throw NothingToReportError("no judgments recorded yet");
  }
  return {humaneval::aggregate_axes(snap->judgments), humaneval::tally_preferences(snap->rankings)};
}

}  // namespace plaba::server
