#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "plaba/cli.hpp"
#include "plaba/corpus.hpp"
#include "plaba/metrics.hpp"
#include "plaba/prediction.hpp"
#include "plaba/util.hpp"
#include "support.hpp"

using namespace plaba;
using json = nlohmann::json;
using testsupport::fixture;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

// In-process; every call writes its manifest into `dir`.
Run plaba_run(const testsupport::TempDir& dir, std::vector<std::string> args) {
  args.insert(args.begin(), {"--manifest", (dir / "manifest.jsonl").string()});
  std::ostringstream out, err;
  int code = cli::cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// The installed binary, for exit status as the shell sees it.
int binary_status(const std::string& args) {
  std::string cmd = std::string(PLABA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string binary_output(const std::string& args) {
  std::string cmd = std::string(PLABA_CLI_PATH) + " " + args + " 2>&1";
  std::string text;
  if (FILE* p = ::popen(cmd.c_str(), "r")) {
    char buf[512];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) text.append(buf, n);
    ::pclose(p);
  }
  return text;
}

// Predictions equal to the (single) reference adaptation of each sentence.
void write_identity_predictions(const corpus::Corpus& c, const std::filesystem::path& out) {
  std::vector<PredictionRecord> recs;
  for (const auto& a : c.abstracts()) {
    const auto* ad = c.adaptations_of(a.id).front();
    for (std::size_t k = 0; k < a.sentences.size(); ++k) {
      recs.push_back({"identity", a.id, k, ad->alignment[k], "", json::object(), std::nullopt});
    }
  }
  save_predictions(recs, out);
}

}  // namespace

TEST_CASE("stats on the minimal fixture") {
  testsupport::TempDir dir;
  auto r = plaba_run(dir, {"stats", "--corpus", fixture("minimal_corpus.json").string()});
  CHECK(r.code == 0);
  auto s = json::parse(r.out);
  CHECK(s.at("n_questions") == 1);
  CHECK(s.at("n_abstracts") == 1);
  CHECK(s.at("n_adaptations") == 1);
  CHECK(s.at("n_multi_adapted") == 0);
  CHECK(s.at("n_pairs") == 2);
}

TEST_CASE("ingest then stats agree with the importer") {
  testsupport::TempDir dir;
  auto r = plaba_run(dir, {"ingest", "--input", fixture("plaba_raw_5.json").string(), "--output",
                           (dir / "corpus.json").string()});
  REQUIRE(r.code == 0);
  auto s = plaba_run(dir, {"stats", "--corpus", (dir / "corpus.json").string()});
  CHECK(json::parse(s.out) == json::parse(r.out));
  CHECK(json::parse(s.out).at("n_pairs") == 15);
}

TEST_CASE("split is reproducible byte for byte") {
  testsupport::TempDir dir;
  const auto corpus = fixture("ten_abstracts.json").string();
  for (const char* name : {"s1.json", "s2.json"}) {
    auto r = plaba_run(dir, {"split", "--corpus", corpus, "--ratios", "0.7,0.15,0.15", "--seed", "7", "--output",
                             (dir / name).string()});
    REQUIRE(r.code == 0);
    CHECK(r.out == "train 7, validation 1, test 2\n");
  }
  CHECK(read_file(dir / "s1.json") == read_file(dir / "s2.json"));
  plaba_run(dir, {"split", "--corpus", corpus, "--ratios", "0.7,0.15,0.15", "--seed", "8", "--output",
                  (dir / "s3.json").string()});
  CHECK(read_file(dir / "s3.json") != read_file(dir / "s1.json"));
}

TEST_CASE("score: identity predictions reach the ceiling") {
  testsupport::TempDir dir;
  const auto corpus = fixture("minimal_corpus.json").string();
  REQUIRE(plaba_run(dir, {"split", "--corpus", corpus, "--ratios", "0,0,1", "--seed", "1", "--output",
                          (dir / "split.json").string()})
              .code == 0);
  write_identity_predictions(corpus::load_corpus(corpus), dir / "id.jsonl");
  auto r = plaba_run(dir, {"score", "--predictions", (dir / "id.jsonl").string(), "--corpus", corpus, "--split",
                           (dir / "split.json").string(), "--section", "test", "--output",
                           (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  auto rep = json::parse(read_file(dir / "report.json"));
  auto report = metrics::report_from_json(rep);
  CHECK(report.aggregates.sari == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.aggregates.corpus_bleu.score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.aggregates.rougeL_f == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.aggregates.n_scored == 2);
  CHECK(r.out.find("identity") != std::string::npos);  // table on stdout

  // without --output the report goes to stdout, same bytes
  auto r2 = plaba_run(dir, {"score", "--predictions", (dir / "id.jsonl").string(), "--corpus", corpus, "--split",
                            (dir / "split.json").string()});
  CHECK(r2.out.rfind(read_file(dir / "report.json"), 0) == 0);
}

TEST_CASE("exit codes from the binary") {
  testsupport::TempDir dir;
  const std::string m = "--manifest " + (dir / "m.jsonl").string() + " ";
  CHECK(binary_status(m + "stats --corpus " + fixture("minimal_corpus.json").string()) == 0);
  CHECK(binary_status(m + "frobnicate") == 1);
  CHECK(binary_status(m + "stats") == 1);  // missing required option
  CHECK(binary_status(m + "stats --corpus /nonexistent/corpus.json") == 2);
  {
    std::ofstream(dir / "bad.json") << "{\"questions\": 3}";
  }
  CHECK(binary_status(m + "stats --corpus " + (dir / "bad.json").string()) == 1);
  CHECK(binary_status(m + "split --corpus " + fixture("minimal_corpus.json").string() +
                      " --ratios 0.5,0.6,0.1 --seed 1 --output " + (dir / "x.json").string()) == 1);
  CHECK(binary_status("--help") == 0);
}

TEST_CASE("usage on unknown subcommand") {
  auto text = binary_output("frobnicate");
  CHECK(text.find("error:") != std::string::npos);
  CHECK(text.find("score") != std::string::npos);
  CHECK(text.find("ingest") != std::string::npos);
}

TEST_CASE("remote generation without credentials exits 2") {
  testsupport::TempDir dir;
  const auto corpus = fixture("minimal_corpus.json").string();
  plaba_run(dir, {"split", "--corpus", corpus, "--ratios", "0,0,1", "--seed", "1", "--output",
                  (dir / "split.json").string()});
  ::unsetenv("PLABA_CLI_TEST_TOKEN");
  auto r = plaba_run(dir, {"generate", "--corpus", corpus, "--split", (dir / "split.json").string(), "--section",
                           "test", "--system-id", "gpt", "--backend", "remote", "--endpoint",
                           "http://127.0.0.1:9/x", "--model", "m", "--credentials-env", "PLABA_CLI_TEST_TOKEN",
                           "--output", (dir / "p.jsonl").string()});
  CHECK(r.code == 2);
  CHECK(!std::filesystem::exists(dir / "p.jsonl"));
  // nothing listening: every request fails, run aborts with a backend error
  r = plaba_run(dir, {"generate", "--corpus", corpus, "--split", (dir / "split.json").string(), "--system-id",
                      "gpt", "--backend", "remote", "--endpoint", "http://127.0.0.1:9/x", "--model", "m",
                      "--retries", "0", "--timeout-ms", "500", "--output", (dir / "p.jsonl").string()});
  CHECK(r.code == 2);
}

TEST_CASE("an output may not overwrite an input") {
  testsupport::TempDir dir;
  std::filesystem::copy_file(fixture("minimal_corpus.json"), dir / "c.json");
  const auto before = read_file(dir / "c.json");
  auto r = plaba_run(dir, {"split", "--corpus", (dir / "c.json").string(), "--ratios", "0,0,1", "--seed", "1",
                           "--output", (dir / "c.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("overwrite") != std::string::npos);
  CHECK(read_file(dir / "c.json") == before);
  CHECK(!std::filesystem::exists(dir / "manifest.jsonl"));
}

TEST_CASE("manifest entries and provenance") {
  testsupport::TempDir dir;
  const auto raw = fixture("plaba_raw_5.json").string();
  const auto lexicon = fixture("lexicon.json").string();
  REQUIRE(plaba_run(dir, {"ingest", "--input", raw, "--output", (dir / "corpus.json").string()}).code == 0);
  REQUIRE(plaba_run(dir, {"split", "--corpus", (dir / "corpus.json").string(), "--ratios", "0.4,0.2,0.4", "--seed",
                          "7", "--output", (dir / "split.json").string()})
              .code == 0);
  REQUIRE(plaba_run(dir, {"generate", "--corpus", (dir / "corpus.json").string(), "--split",
                          (dir / "split.json").string(), "--section", "test", "--system-id", "rules",
                          "--lexicon", lexicon, "--output", (dir / "pred.jsonl").string()})
              .code == 0);
  REQUIRE(plaba_run(dir, {"score", "--predictions", (dir / "pred.jsonl").string(), "--corpus",
                          (dir / "corpus.json").string(), "--split", (dir / "split.json").string(), "--output",
                          (dir / "report.json").string()})
              .code == 0);

  auto entries = cli::load_manifest(dir / "manifest.jsonl");
  REQUIRE(entries.size() == 4);
  CHECK(entries[0].at("command") == "ingest");
  CHECK(entries[1].at("seed") == 7);
  CHECK(entries[2].at("system_ids") == json::array({"rules"}));
  CHECK(entries[2].at("template_ids") == json::array({"rule-based"}));
  for (const auto& e : entries) {
    for (const auto& f : e.at("inputs")) CHECK(f.at("sha256").get<std::string>().size() == 64);
    CHECK(!e.at("timestamp").get<std::string>().empty());
  }
  CHECK(entries[3].at("outputs")[0].at("sha256") == sha256_hex(read_file(dir / "report.json")));

  auto tree = cli::trace_provenance(entries, dir / "report.json");
  CHECK(tree.at("produced_by").at("command") == "score");
  // report <- score <- {corpus <- ingest <- raw, split <- split, predictions <- generate}
  std::function<bool(const json&, const std::string&)> reaches = [&](const json& node, const std::string& sha) {
    if (node.at("sha256") == sha) return true;
    for (const auto& in : node.at("inputs")) {
      if (reaches(in, sha)) return true;
    }
    return false;
  };
  CHECK(reaches(tree, sha256_hex(read_file(raw))));
  CHECK(reaches(tree, sha256_hex(read_file(lexicon))));

  auto r = plaba_run(dir, {"report", "--metrics", (dir / "report.json").string(), "--provenance"});
  CHECK(r.code == 0);
  CHECK(r.out.find("provenance") != std::string::npos);
  CHECK(r.out.find("ingest") != std::string::npos);
  CHECK(r.out.find("plaba_raw_5.json") != std::string::npos);

  // a changed file no longer matches what the manifest recorded
  { std::ofstream(dir / "report.json", std::ios::app) << " "; }
  auto stale = cli::trace_provenance(cli::load_manifest(dir / "manifest.jsonl"), dir / "report.json");
  CHECK(!stale.contains("produced_by"));
}

TEST_CASE("report: human tables from logs, empty is an error") {
  testsupport::TempDir dir;
  auto r = plaba_run(dir, {"report", "--rankings", fixture("rankings_10.jsonl").string(), "--format", "json"});
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  CHECK(doc.at("preferences")[0].at("system_id") == "sysA");
  CHECK(doc.at("preferences")[0].at("first_preferences") == 9);
  r = plaba_run(dir, {"report", "--data-dir", (dir / "empty").string()});
  CHECK(r.code == 1);
  r = plaba_run(dir, {"report"});
  CHECK(r.code == 1);
}

TEST_CASE("sample writes seeded samples") {
  testsupport::TempDir dir;
  const auto corpus = fixture("ten_abstracts.json").string();
  auto r = plaba_run(dir, {"sample", "--corpus", corpus, "--seed", "3", "--preset", "all", "--output",
                           (dir / "a.json").string()});
  REQUIRE(r.code == 0);
  plaba_run(dir, {"sample", "--corpus", corpus, "--seed", "3", "--preset", "all", "--output",
                  (dir / "b.json").string()});
  CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  CHECK(json::parse(read_file(dir / "a.json")).at("samples").size() == 1);
  // the external preset needs 40 questions
  CHECK(plaba_run(dir, {"sample", "--corpus", corpus, "--seed", "3", "--output", (dir / "c.json").string()}).code ==
        1);
}
