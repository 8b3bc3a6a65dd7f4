#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "plaba/corpus.hpp"
#include "plaba/error.hpp"
#include "plaba/humaneval.hpp"
#include "plaba/metrics.hpp"
#include "plaba/prediction.hpp"

namespace httplib {
class Server;
}

namespace plaba::server {

// Submission names an annotator, task or candidate label the session does
// not know.
class UnknownReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NothingToReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Append-only annotation log

// Judgments, rankings and accuracy selections, each in its own JSON Lines
// file under the data directory. Appends go through one writer and are
// fsync'ed before returning; readers get immutable snapshots.
class AnnotationStore {
 public:
  using JudgedKey = std::tuple<std::string, std::string, std::string, std::size_t,
                               humaneval::Axis>;  // annotator, system, abstract, sentence, axis
  using AbstractKey = std::pair<std::string, std::string>;  // annotator, abstract

  struct Snapshot {
    std::vector<humaneval::Judgment> judgments;
    std::vector<humaneval::PreferenceRanking> rankings;
    std::vector<humaneval::AccuracySelection> selections;
    std::set<std::string> judgment_ids;
    std::set<JudgedKey> judged;
    std::map<AbstractKey, std::size_t> ranking_index;
    std::map<AbstractKey, std::size_t> selection_index;
  };

  // Replays existing logs. A trailing line cut short by a crash is dropped
  // and truncated away so later appends start on a clean line.
  explicit AnnotationStore(std::filesystem::path dir);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Each returns false when the record was already stored (no-op).
  bool append(const humaneval::Judgment& judgment);
  bool append(const humaneval::PreferenceRanking& ranking);
  bool append(const humaneval::AccuracySelection& selection);

  std::shared_ptr<const Snapshot> snapshot() const;

  static constexpr const char* kJudgmentsFile = "judgments.jsonl";
  static constexpr const char* kRankingsFile = "rankings.jsonl";
  static constexpr const char* kSelectionsFile = "accuracy_selections.jsonl";

 private:
  void write_line(int fd, const std::string& line);
  void publish(std::shared_ptr<Snapshot> next);

  std::filesystem::path dir_;
  int judgments_fd_ = -1;
  int rankings_fd_ = -1;
  int selections_fd_ = -1;
  mutable std::mutex write_mu_;
  mutable std::mutex read_mu_;
  std::shared_ptr<const Snapshot> current_;
};

// ---------------------------------------------------------------------------
// Evaluation session

enum class TaskKind { kAxisJudgment, kPreferenceRanking, kAccuracySelection };

std::string task_kind_name(TaskKind kind);

struct TaskAssignment {
  std::string task_id;
  std::string annotator_id;
  TaskKind kind = TaskKind::kAxisJudgment;
  // Self-contained and blinded: question, source text, candidates under
  // labels A, B, ..., axis descriptors. Never contains system ids.
  nlohmann::json payload;
};

struct SessionConfig {
  std::vector<humaneval::EvalSample> samples;
  std::vector<std::vector<PredictionRecord>> runs;  // one per system
  std::vector<std::string> annotators;
  std::uint64_t seed = 0;
};

struct JudgmentSubmission {
  std::string id;
  std::string annotator_id;
  std::string task_id;
  std::string candidate;  // blinded label
  std::string axis;
  int raw = 0;
};

struct RankingSubmission {
  std::string annotator_id;
  std::string task_id;
  std::vector<std::string> ordered_labels;
};

struct SelectionSubmission {
  std::string annotator_id;
  std::string task_id;
  std::vector<std::size_t> sentence_indices;
};

struct Ack {
  bool stored = false;  // false: duplicate, nothing written
  std::string record;   // id or key of the record
};

JudgmentSubmission judgment_submission_from_json(const nlohmann::json& doc);
RankingSubmission ranking_submission_from_json(const nlohmann::json& doc);
SelectionSubmission selection_submission_from_json(const nlohmann::json& doc);

class EvaluationService {
 public:
  // Builds the deterministic task sequence and blinding from `config.seed`
  // and writes the label -> system mapping to <data_dir>/blinding.json.
  EvaluationService(const corpus::Corpus& corpus, SessionConfig config,
                    const std::filesystem::path& data_dir);

  // First task this annotator has not completed, or nullopt when done.
  std::optional<TaskAssignment> next_task(const std::string& annotator_id) const;

  Ack submit_judgment(const JudgmentSubmission& submission);
  Ack submit_ranking(const RankingSubmission& submission);
  Ack submit_selection(const SelectionSubmission& submission);

  nlohmann::json session_progress() const;

  void set_automatic_reports(std::vector<metrics::MetricsReport> reports);
  // Same bytes as `plaba score` writes; `system` selects among several runs.
  std::string automatic_report(const std::string& system = "") const;
  humaneval::HumanReport human_report() const;

  const AnnotationStore& store() const { return store_; }
  std::size_t task_count() const { return tasks_.size(); }
  nlohmann::json blinding_json() const;

 private:
  struct TaskDef {
    std::string id;
    TaskKind kind;
    std::size_t sample_index;
    std::size_t sentence_index;            // axis tasks only
    std::vector<std::string> systems;      // in label order
  };

  const TaskDef& find_task(const std::string& task_id) const;
  void require_annotator(const std::string& annotator_id) const;
  std::vector<humaneval::Axis> axes_for(const TaskDef& task, const std::string& annotator,
                                        const AnnotationStore::Snapshot& snap) const;
  bool completed(const TaskDef& task, const std::string& annotator,
                 const AnnotationStore::Snapshot& snap) const;
  TaskAssignment render(const TaskDef& task, const std::string& annotator,
                        const AnnotationStore::Snapshot& snap) const;
  const PredictionRecord* prediction(const std::string& system, const std::string& abstract_id,
                                     std::size_t sentence) const;

  const corpus::Corpus& corpus_;
  SessionConfig config_;
  std::set<std::string> annotators_;
  std::vector<std::string> systems_;
  std::map<std::tuple<std::string, std::string, std::size_t>, const PredictionRecord*> predictions_;
  std::vector<TaskDef> tasks_;
  std::map<std::string, std::size_t> task_index_;
  AnnotationStore store_;
  std::vector<metrics::MetricsReport> auto_reports_;
};

// ---------------------------------------------------------------------------
// HTTP front end

// Routes:
//   GET  /api/tasks/next?annotator=ID
//   POST /api/judgments   POST /api/rankings   POST /api/accuracy-selection
//   GET  /api/reports/automatic[?system=ID]
//   GET  /api/reports/human[?format=text]
//   GET  /api/session
// plus static files from `static_dir` at "/" when given.
class HttpFrontend {
 public:
  HttpFrontend(EvaluationService& service, std::optional<std::filesystem::path> static_dir = {});
  ~HttpFrontend();

  bool listen(const std::string& host, int port);
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  EvaluationService& service_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace plaba::server
