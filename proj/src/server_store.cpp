#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "plaba/server.hpp"
#include "plaba/util.hpp"

namespace plaba::server {

using nlohmann::json;

namespace {

int open_log(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  return fd;
}

// Returns the complete lines of a log, truncating a torn final line.
std::vector<std::string> recover_lines(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::string text = read_file(path);
  if (!text.empty() && text.back() != '\n') {
    auto keep = text.rfind('\n');
    keep = keep == std::string::npos ? 0 : keep + 1;
    std::filesystem::resize_file(path, keep);
    text.resize(keep);
  }
  return read_lines(path, false);
}

void add(AnnotationStore::Snapshot& s, const humaneval::Judgment& j) {
  s.judgment_ids.insert(j.id);
  s.judged.emplace(j.annotator_id, j.system_id, j.abstract_id, j.sentence_index, j.axis);
  s.judgments.push_back(j);
}

void add(AnnotationStore::Snapshot& s, const humaneval::PreferenceRanking& r) {
  s.ranking_index[{r.annotator_id, r.abstract_id}] = s.rankings.size();
  s.rankings.push_back(r);
}

void add(AnnotationStore::Snapshot& s, const humaneval::AccuracySelection& sel) {
  s.selection_index[{sel.annotator_id, sel.abstract_id}] = s.selections.size();
  s.selections.push_back(sel);
}

template <typename Parse>
void replay(const std::filesystem::path& path, Parse parse) {
  std::size_t line_no = 0;
  for (const auto& line : recover_lines(path)) {
    ++line_no;
    try {
      parse(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": corrupt record: " +
                            e.what());
    }
  }
}

}  // namespace

AnnotationStore::AnnotationStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create data directory " + dir_.string() + ": " + ec.message());

  auto snap = std::make_shared<Snapshot>();
  replay(dir_ / kJudgmentsFile, [&](const json& doc) {
    auto j = humaneval::judgment_from_json(doc);
    if (!snap->judgment_ids.contains(j.id)) add(*snap, j);
  });
  replay(dir_ / kRankingsFile, [&](const json& doc) {
    auto r = humaneval::ranking_from_json(doc);
    if (!snap->ranking_index.contains({r.annotator_id, r.abstract_id})) add(*snap, r);
  });
  replay(dir_ / kSelectionsFile, [&](const json& doc) {
    auto s = humaneval::selection_from_json(doc);
    if (!snap->selection_index.contains({s.annotator_id, s.abstract_id})) add(*snap, s);
  });
  current_ = std::move(snap);

  judgments_fd_ = open_log(dir_ / kJudgmentsFile);
  rankings_fd_ = open_log(dir_ / kRankingsFile);
  selections_fd_ = open_log(dir_ / kSelectionsFile);
}

AnnotationStore::~AnnotationStore() {
  for (int fd : {judgments_fd_, rankings_fd_, selections_fd_}) {
    if (fd >= 0) ::close(fd);
  }
}

void AnnotationStore::write_line(int fd, const std::string& line) {
  std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("annotation log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) throw IoError(std::string("fsync failed: ") + std::strerror(errno));
}

void AnnotationStore::publish(std::shared_ptr<Snapshot> next) {
  std::lock_guard lock(read_mu_);
  current_ = std::move(next);
}

std::shared_ptr<const AnnotationStore::Snapshot> AnnotationStore::snapshot() const {
  std::lock_guard lock(read_mu_);
  return current_;
}

bool AnnotationStore::append(const humaneval::Judgment& judgment) {
  judgment.validate();
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  if (snap->judgment_ids.contains(judgment.id)) return false;
  write_line(judgments_fd_, humaneval::judgment_to_json(judgment).dump());
  auto next = std::make_shared<Snapshot>(*snap);
  add(*next, judgment);
  publish(std::move(next));
  return true;
}

bool AnnotationStore::append(const humaneval::PreferenceRanking& ranking) {
  ranking.validate();
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  if (snap->ranking_index.contains({ranking.annotator_id, ranking.abstract_id})) return false;
  write_line(rankings_fd_, humaneval::ranking_to_json(ranking).dump());
  auto next = std::make_shared<Snapshot>(*snap);
  add(*next, ranking);
  publish(std::move(next));
  return true;
}

bool AnnotationStore::append(const humaneval::AccuracySelection& selection) {
  selection.validate();
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  if (snap->selection_index.contains({selection.annotator_id, selection.abstract_id})) return false;
  write_line(selections_fd_, humaneval::selection_to_json(selection).dump());
  auto next = std::make_shared<Snapshot>(*snap);
  add(*next, selection);
  publish(std::move(next));
  return true;
}

}  // namespace plaba::server
