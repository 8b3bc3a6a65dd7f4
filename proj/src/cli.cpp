#include "plaba/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "plaba/adapt.hpp"
#include "plaba/corpus.hpp"
#include "plaba/error.hpp"
#include "plaba/humaneval.hpp"
#include "plaba/metrics.hpp"
#include "plaba/server.hpp"
#include "plaba/textproc.hpp"
#include "plaba/util.hpp"

namespace plaba::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string canonical_string(const fs::path& p) { return fs::weakly_canonical(fs::absolute(p)).string(); }

// Collects what one subcommand read and wrote.
class ManifestEntry {
 public:
  ManifestEntry(std::string command, const std::vector<std::string>& argv) {
    doc_ = {{"command", std::move(command)},
            {"argv", argv},
            {"timestamp", utc_timestamp()},
            {"system_ids", json::array()},
            {"template_ids", json::array()},
            {"inputs", json::array()},
            {"outputs", json::array()}};
  }

  void input(const std::string& role, const fs::path& path) {
    doc_["inputs"].push_back(file_node(role, path));
    input_paths_.insert(canonical_string(path));
  }
  void output(const std::string& role, const fs::path& path) {
    doc_["outputs"].push_back(file_node(role, path));
  }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void system(const std::string& id) { doc_["system_ids"].push_back(id); }
  void template_id(const std::string& id) { doc_["template_ids"].push_back(id); }
  void note(const std::string& key, json value) { doc_[key] = std::move(value); }

  // Refuses to overwrite anything this command reads.
  void guard_output(const fs::path& path) const {
    if (input_paths_.contains(canonical_string(path))) {
      throw ValidationError("output " + path.string() + " would overwrite an input");
    }
  }

  void append_to(const fs::path& manifest) const {
    if (input_paths_.contains(canonical_string(manifest))) {
      throw ValidationError("manifest path collides with an input");
    }
    std::string existing = fs::exists(manifest) ? read_file(manifest) : "";
    if (!existing.empty() && existing.back() != '\n') existing += '\n';
    write_file_atomic(manifest, existing + doc_.dump() + "\n");
  }

 private:
  static json file_node(const std::string& role, const fs::path& path) {
    return {{"role", role}, {"path", canonical_string(path)}, {"sha256", file_sha256(path)}};
  }

  json doc_;
  std::set<std::string> input_paths_;
};

std::set<std::string> abbreviations_from(const std::string& path, ManifestEntry& m) {
  if (path.empty()) return textproc::default_abbreviations();
  m.input("abbreviations", path);
  return textproc::load_abbreviations(path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = textproc::collapse_whitespace(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Blocks SIGINT/SIGTERM in this thread (inherited by server threads) and
// stops the server when either arrives.
class SignalStopper {
 public:
  explicit SignalStopper(server::HttpFrontend& frontend) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
    waiter_ = std::thread([this, &frontend] {
      int sig = 0;
      sigwait(&set_, &sig);
      frontend.stop();
    });
  }
  ~SignalStopper() {
    // Wake the waiter if no signal came.
    pthread_kill(waiter_.native_handle(), SIGTERM);
    waiter_.join();
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }

 private:
  sigset_t set_{};
  sigset_t old_{};
  std::thread waiter_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Provenance

std::vector<json> load_manifest(const fs::path& path) {
  std::vector<json> entries;
  if (!fs::exists(path)) return entries;
  std::size_t n = 0;
  for (const auto& line : read_lines(path, false)) {
    ++n;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return entries;
}

namespace {

json trace_node(const std::vector<json>& manifest, const std::string& path, const std::string& sha,
                const std::string& role, std::set<std::string>& visiting) {
  json node = {{"path", path}, {"sha256", sha}};
  if (!role.empty()) node["role"] = role;
  node["inputs"] = json::array();
  if (visiting.contains(sha)) return node;
  // Latest entry that wrote these exact bytes.
  for (auto it = manifest.rbegin(); it != manifest.rend(); ++it) {
    bool match = false;
    for (const auto& out : it->value("outputs", json::array())) {
      if (out.value("sha256", "") == sha && (out.value("path", "") == path || path.empty())) {
        match = true;
      }
    }
    if (!match) {
      for (const auto& out : it->value("outputs", json::array())) {
        if (out.value("sha256", "") == sha) match = true;
      }
    }
    if (!match) continue;
    json entry = *it;
    entry.erase("inputs");
    entry.erase("outputs");
    node["produced_by"] = entry;
    visiting.insert(sha);
    for (const auto& in : it->value("inputs", json::array())) {
      node["inputs"].push_back(trace_node(manifest, in.value("path", ""), in.value("sha256", ""),
                                          in.value("role", ""), visiting));
    }
    visiting.erase(sha);
    break;
  }
  return node;
}

void format_node(const json& node, std::size_t depth, std::ostringstream& os) {
  std::string pad(depth * 2, ' ');
  os << pad;
  if (node.contains("role")) os << node["role"].get<std::string>() << ": ";
  os << node["path"].get<std::string>() << " [sha256 " << node["sha256"].get<std::string>().substr(0, 12)
     << "]\n";
  if (node.contains("produced_by")) {
    const auto& e = node["produced_by"];
    os << pad << "  <- plaba " << e.value("command", "?") << " at " << e.value("timestamp", "?");
    if (e.contains("seed")) os << " seed " << e["seed"].dump();
    if (!e.value("system_ids", json::array()).empty()) os << " systems " << e["system_ids"].dump();
    if (!e.value("template_ids", json::array()).empty()) os << " templates " << e["template_ids"].dump();
    os << "\n";
    for (const auto& in : node["inputs"]) format_node(in, depth + 2, os);
  } else {
    os << pad << "  (source file, not produced by a recorded command)\n";
  }
}

}  // namespace

json trace_provenance(const std::vector<json>& manifest, const fs::path& file) {
  std::set<std::string> visiting;
  return trace_node(manifest, canonical_string(file), file_sha256(file), "", visiting);
}

std::string format_provenance(const json& tree) {
  std::ostringstream os;
  format_node(tree, 0, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Dispatch

int cli_dispatch(const std::vector<std::string>& args) { return cli_dispatch(args, std::cout, std::cerr); }

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plain-language adaptation workbench", "plaba"};
  app.require_subcommand(1, 1);
  std::string manifest_path = "run_manifest.jsonl";
  app.add_option("--manifest", manifest_path, "Run manifest (JSON Lines) to append to");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert a raw PLABA-layout JSON file to corpus JSON");
  std::string ingest_input, ingest_output, abbrev_path;
  ingest->add_option("--input", ingest_input, "Raw dataset JSON")->required();
  ingest->add_option("--output", ingest_output, "Corpus JSON to write")->required();
  ingest->add_option("--abbreviations", abbrev_path, "Sentence-splitter abbreviation list");

  // stats
  auto* stats = app.add_subcommand("stats", "Print corpus counts");
  std::string corpus_path;
  stats->add_option("--corpus", corpus_path, "Corpus JSON")->required();

  // pairs
  auto* pairs = app.add_subcommand("pairs", "Emit aligned sentence pairs as JSON Lines");
  std::string pairs_output, drop_policy = "keep-empty";
  pairs->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  pairs->add_option("--drop-policy", drop_policy, "keep-empty | exclude-dropped");
  pairs->add_option("--output", pairs_output, "Output file (default stdout)");

  // split
  auto* split = app.add_subcommand("split", "Seeded train/validation/test split of abstracts");
  std::string ratios_text = "0.7,0.15,0.15", split_output;
  std::uint64_t seed = 0;
  split->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  split->add_option("--ratios", ratios_text, "train,validation,test");
  split->add_option("--seed", seed, "Shuffle seed")->required();
  split->add_option("--output", split_output, "Split JSON to write")->required();

  // generate
  auto* generate = app.add_subcommand("generate", "Produce a prediction run for one split section");
  std::string split_path, section_name = "test", system_id, backend = "rule-based", lexicon_path,
                          gen_output, endpoint, model, prompt_kind = "guideline", template_path,
                          credentials_env, cache_dir, params_text = "{}";
  std::size_t threads = 1, max_concurrency = 4, retries = 3;
  long timeout_ms = 60000, backoff_ms = 200;
  generate->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  generate->add_option("--split", split_path, "Split JSON")->required();
  generate->add_option("--section", section_name, "train | validation | test");
  generate->add_option("--system-id", system_id, "Identifier stored in each record")->required();
  generate->add_option("--backend", backend, "rule-based | remote");
  generate->add_option("--lexicon", lexicon_path, "Guideline lexicon JSON (rule-based)");
  generate->add_option("--threads", threads, "Worker threads (rule-based)");
  generate->add_option("--endpoint", endpoint, "Generation endpoint URL (remote)");
  generate->add_option("--model", model, "Model name (remote)");
  generate->add_option("--prompt", prompt_kind, "instruction | guideline (remote)");
  generate->add_option("--template", template_path, "Prompt template JSON (remote)");
  generate->add_option("--credentials-env", credentials_env, "Env var holding the bearer token");
  generate->add_option("--max-concurrency", max_concurrency, "Concurrent requests (remote)");
  generate->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
  generate->add_option("--retries", retries, "Retry limit for transient failures");
  generate->add_option("--backoff-ms", backoff_ms, "Base retry backoff");
  generate->add_option("--cache-dir", cache_dir, "Response cache directory (remote)");
  generate->add_option("--params", params_text, "Model parameters as a JSON object");
  generate->add_option("--abbreviations", abbrev_path, "Abbreviation list for output splitting");
  generate->add_option("--output", gen_output, "Predictions JSON Lines to write")->required();

  // score
  auto* score = app.add_subcommand("score", "Score prediction runs against the reference adaptations");
  std::vector<std::string> prediction_paths, score_outputs;
  std::string table_path, sentence_smoothing = "none", corpus_smoothing = "none", multi_ref = "best";
  score->add_option("--predictions", prediction_paths, "Predictions JSON Lines (repeatable)")->required();
  score->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  score->add_option("--split", split_path, "Split JSON")->required();
  score->add_option("--section", section_name, "train | validation | test");
  score->add_option("--output", score_outputs, "Report JSON per predictions file (default stdout)");
  score->add_option("--table", table_path, "Also write the table here");
  score->add_option("--sentence-smoothing", sentence_smoothing, "none | add-one-on-zero");
  score->add_option("--corpus-smoothing", corpus_smoothing, "none | add-one-on-zero");
  score->add_option("--multi-ref", multi_ref, "best | average");
  score->add_option("--threads", threads, "Scoring threads");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw abstracts for human evaluation");
  std::string preset_name = "external", question_list, sample_output;
  sample->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  sample->add_option("--seed", seed, "Sampling seed")->required();
  sample->add_option("--preset", preset_name, "external | internal | all");
  sample->add_option("--questions", question_list, "Comma-separated question ids (default all)");
  sample->add_option("--output", sample_output, "Samples JSON to write")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation server");
  std::string samples_path, annotator_list, data_dir, host = "127.0.0.1", static_dir;
  std::vector<std::string> report_paths;
  int port = 8080;
  serve->add_option("--corpus", corpus_path, "Corpus JSON")->required();
  serve->add_option("--samples", samples_path, "Samples JSON from `sample`")->required();
  serve->add_option("--predictions", prediction_paths, "Predictions per system (repeatable)")->required();
  serve->add_option("--annotators", annotator_list, "Comma-separated annotator ids")->required();
  serve->add_option("--seed", seed, "Session seed (task order, blinding)")->required();
  serve->add_option("--data-dir", data_dir, "Annotation store directory")->required();
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port (0 = any)");
  serve->add_option("--static-dir", static_dir, "Static files served at /");
  serve->add_option("--reports", report_paths, "Metrics report JSON (repeatable)");
  serve->add_option("--split", split_path, "Split JSON; scores the predictions at startup");
  serve->add_option("--section", section_name, "Section scored with --split");

  // report
  auto* report = app.add_subcommand("report", "Print automatic or human evaluation reports");
  std::vector<std::string> metrics_paths;
  std::string judgments_path, rankings_path, format = "text", report_output;
  bool provenance = false;
  report->add_option("--metrics", metrics_paths, "Metrics report JSON (repeatable)");
  report->add_option("--data-dir", data_dir, "Annotation store directory");
  report->add_option("--judgments", judgments_path, "Judgments JSON Lines");
  report->add_option("--rankings", rankings_path, "Rankings JSON Lines");
  report->add_option("--format", format, "text | json");
  report->add_option("--output", report_output, "Write the report here as well");
  report->add_flag("--provenance", provenance, "Trace every input back through the manifest");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 1;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  ManifestEntry manifest(chosen->get_name(), args);

  auto write_output = [&](const std::string& role, const fs::path& path, const std::string& text) {
    manifest.guard_output(path);
    write_file_atomic(path, text);
    manifest.output(role, path);
  };

  try {
    if (chosen == ingest) {
      manifest.input("raw", ingest_input);
      auto abbrevs = abbreviations_from(abbrev_path, manifest);
      auto corpus = corpus::import_plaba_file(ingest_input, abbrevs);
      write_output("corpus", ingest_output, corpus::corpus_to_json(corpus).dump(2) + "\n");
      out << corpus::stats_to_json(corpus::corpus_stats(corpus)).dump() << "\n";

    } else if (chosen == stats) {
      manifest.input("corpus", corpus_path);
      auto corpus = corpus::load_corpus(corpus_path);
      auto s = corpus::stats_to_json(corpus::corpus_stats(corpus));
      manifest.note("stats", s);
      out << s.dump(2) << "\n";

    } else if (chosen == pairs) {
      manifest.input("corpus", corpus_path);
      auto corpus = corpus::load_corpus(corpus_path);
      std::string text;
      for (const auto& p : corpus::build_sentence_pairs(corpus, corpus::parse_drop_policy(drop_policy))) {
        text += corpus::pair_to_json(p).dump() + "\n";
      }
      if (pairs_output.empty()) {
        out << text;
      } else {
        write_output("pairs", pairs_output, text);
      }

    } else if (chosen == split) {
      manifest.input("corpus", corpus_path);
      manifest.seed(seed);
      auto corpus = corpus::load_corpus(corpus_path);
      auto result = corpus::split_corpus(corpus, corpus::parse_ratios(ratios_text), seed);
      write_output("split", split_output, corpus::split_to_json(result).dump(2) + "\n");
      out << "train " << result.train.size() << ", validation " << result.validation.size()
          << ", test " << result.test.size() << "\n";

    } else if (chosen == generate) {
      manifest.input("corpus", corpus_path);
      manifest.input("split", split_path);
      manifest.system(system_id);
      auto corpus = corpus::load_corpus(corpus_path);
      auto split_def = corpus::load_split(split_path);
      corpus::validate_split(split_def, corpus);
      adapt::GenerateRequest request{system_id, corpus::parse_section(section_name)};
      manifest.note("section", section_name);

      adapt::GenerateResult result;
      if (backend == "rule-based") {
        adapt::RuleBasedConfig rules;
        if (!lexicon_path.empty()) {
          manifest.input("lexicon", lexicon_path);
          rules.lexicon = adapt::load_lexicon(lexicon_path);
        }
        rules.threads = std::max<std::size_t>(1, threads);
        manifest.template_id("rule-based");
        manifest.guard_output(gen_output);
        result = adapt::generate_run(rules, corpus, split_def, request);
      } else if (backend == "remote") {
        adapt::RemoteConfig remote;
        remote.backend.endpoint = endpoint;
        remote.backend.model_name = model;
        remote.backend.max_concurrency = max_concurrency;
        remote.backend.request_timeout = std::chrono::milliseconds(timeout_ms);
        remote.backend.retry_limit = retries;
        remote.backend.retry_backoff = std::chrono::milliseconds(backoff_ms);
        remote.backend.credentials_env = credentials_env;
        remote.backend.validate();
        if (!template_path.empty()) {
          manifest.input("template", template_path);
          remote.prompt = adapt::load_template(template_path);
        } else if (prompt_kind == "instruction") {
          remote.prompt = adapt::default_instruction_template();
        } else if (prompt_kind != "guideline") {
          throw ValidationError("unknown prompt kind: " + prompt_kind + " (expected instruction|guideline)");
        }
        manifest.template_id(remote.prompt.id);
        try {
          remote.model_params = json::parse(params_text);
        } catch (const json::parse_error& e) {
          throw ValidationError(std::string("--params is not valid JSON: ") + e.what());
        }
        if (!remote.model_params.is_object()) throw ValidationError("--params must be a JSON object");
        if (!cache_dir.empty()) remote.cache_dir = cache_dir;
        remote.abbreviations = abbreviations_from(abbrev_path, manifest);
        manifest.note("model", model);
        manifest.guard_output(gen_output);
        result = adapt::generate_run(remote, corpus, split_def, request);
      } else {
        throw ValidationError("unknown backend: " + backend + " (expected rule-based|remote)");
      }

      for (const auto& entry : result.retry_log) {
        err << "retry " << entry.abstract_id << "#" << entry.sentence_index << " attempt "
            << entry.attempt << ": " << entry.message << "\n";
      }
      save_predictions(result.records, gen_output);
      manifest.output("predictions", gen_output);
      manifest.note("generation", {{"records", result.records.size()},
                                   {"requests", result.requests},
                                   {"cache_hits", result.cache_hits},
                                   {"retries", result.retries},
                                   {"failures", result.failures}});
      out << "wrote " << result.records.size() << " records (" << result.failures << " failed, "
          << result.cache_hits << " cached, " << result.retries << " retries)\n";

    } else if (chosen == score) {
      if (!score_outputs.empty() && score_outputs.size() != prediction_paths.size()) {
        throw ValidationError("give one --output per --predictions file");
      }
      manifest.input("corpus", corpus_path);
      manifest.input("split", split_path);
      for (const auto& p : prediction_paths) manifest.input("predictions", p);
      auto corpus = corpus::load_corpus(corpus_path);
      auto split_def = corpus::load_split(split_path);
      corpus::validate_split(split_def, corpus);
      metrics::ScoringConfig config;
      config.sentence_smoothing = metrics::parse_smoothing(sentence_smoothing);
      config.corpus_smoothing = metrics::parse_smoothing(corpus_smoothing);
      config.multi_ref = metrics::parse_multi_ref(multi_ref);
      config.threads = std::max<std::size_t>(1, threads);
      const auto section = corpus::parse_section(section_name);
      manifest.note("section", section_name);

      std::vector<metrics::MetricsReport> reports;
      for (std::size_t i = 0; i < prediction_paths.size(); ++i) {
        auto run = load_predictions(prediction_paths[i]);
        reports.push_back(metrics::evaluate_run(run, corpus, split_def, section, config));
        manifest.system(reports.back().system_id);
        if (!score_outputs.empty()) {
          write_output("report", score_outputs[i], metrics::report_json_text(reports.back()));
        } else {
          out << metrics::report_json_text(reports.back());
        }
      }
      std::string table = metrics::format_report_table(reports);
      out << table;
      if (!table_path.empty()) write_output("table", table_path, table);

    } else if (chosen == sample) {
      manifest.input("corpus", corpus_path);
      manifest.seed(seed);
      auto corpus = corpus::load_corpus(corpus_path);
      auto samples = humaneval::sample_for_evaluation(corpus, split_list(question_list), seed,
                                                      humaneval::parse_preset(preset_name));
      manifest.note("preset", preset_name);
      write_output("samples", sample_output, humaneval::samples_to_json(samples, seed).dump(2) + "\n");
      out << "sampled " << samples.size() << " abstracts\n";

    } else if (chosen == serve) {
      manifest.input("corpus", corpus_path);
      manifest.input("samples", samples_path);
      manifest.seed(seed);
      auto corpus = corpus::load_corpus(corpus_path);
      server::SessionConfig config;
      config.samples = humaneval::load_samples(samples_path);
      config.annotators = split_list(annotator_list);
      config.seed = seed;
      for (const auto& p : prediction_paths) {
        manifest.input("predictions", p);
        config.runs.push_back(load_predictions(p));
        if (!config.runs.back().empty()) manifest.system(config.runs.back().front().system_id);
      }

      std::vector<metrics::MetricsReport> auto_reports;
      for (const auto& r : report_paths) {
        manifest.input("report", r);
        auto_reports.push_back(metrics::report_from_json(read_json_file(r)));
      }
      if (!split_path.empty()) {
        manifest.input("split", split_path);
        auto split_def = corpus::load_split(split_path);
        corpus::validate_split(split_def, corpus);
        for (const auto& run : config.runs) {
          auto_reports.push_back(metrics::evaluate_run(run, corpus, split_def,
                                                       corpus::parse_section(section_name)));
        }
      }

      server::EvaluationService service(corpus, std::move(config), data_dir);
      service.set_automatic_reports(std::move(auto_reports));
      manifest.output("blinding", fs::path(data_dir) / "blinding.json");
      manifest.append_to(manifest_path);

      std::optional<fs::path> static_root;
      if (!static_dir.empty()) static_root = static_dir;
      server::HttpFrontend frontend(service, static_root);
      int bound = port;
      if (port == 0) bound = frontend.bind_to_any_port(host);
      {
        SignalStopper stopper(frontend);
        out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
        bool ok = port == 0 ? bound > 0 && frontend.listen_after_bind() : frontend.listen(host, port);
        if (!ok) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
      }
      return 0;

    } else if (chosen == report) {
      std::string text;
      std::vector<std::string> traced;
      if (!metrics_paths.empty()) {
        std::vector<metrics::MetricsReport> reports;
        json docs = json::array();
        for (const auto& p : metrics_paths) {
          manifest.input("report", p);
          traced.push_back(p);
          reports.push_back(metrics::report_from_json(read_json_file(p)));
          docs.push_back(metrics::report_to_json(reports.back()));
        }
        text += format == "json" ? docs.dump(2) + "\n" : metrics::format_report_table(reports);
      }
      if (!data_dir.empty()) {
        if (judgments_path.empty()) judgments_path = (fs::path(data_dir) / server::AnnotationStore::kJudgmentsFile).string();
        if (rankings_path.empty()) rankings_path = (fs::path(data_dir) / server::AnnotationStore::kRankingsFile).string();
      }
      if (!judgments_path.empty() || !rankings_path.empty()) {
        humaneval::HumanReport human;
        std::vector<humaneval::Judgment> judgments;
        std::vector<humaneval::PreferenceRanking> rankings;
        if (!judgments_path.empty() && fs::exists(judgments_path)) {
          manifest.input("judgments", judgments_path);
          traced.push_back(judgments_path);
          judgments = humaneval::load_judgments(judgments_path);
        }
        if (!rankings_path.empty() && fs::exists(rankings_path)) {
          manifest.input("rankings", rankings_path);
          traced.push_back(rankings_path);
          rankings = humaneval::load_rankings(rankings_path);
        }
        if (judgments.empty() && rankings.empty()) throw ValidationError("nothing to report: no judgments recorded");
        human.axes = humaneval::aggregate_axes(judgments);
        human.preferences = humaneval::tally_preferences(rankings);
        text += format == "json" ? humaneval::human_report_to_json(human).dump(2) + "\n"
                                 : humaneval::format_human_table(human);
      }
      if (metrics_paths.empty() && judgments_path.empty() && rankings_path.empty()) {
        throw ValidationError("report needs --metrics, --data-dir, --judgments or --rankings");
      }
      if (format != "text" && format != "json") throw ValidationError("unknown format: " + format);
      if (provenance) {
        auto entries = load_manifest(manifest_path);
        json trees = json::array();
        for (const auto& p : traced) trees.push_back(trace_provenance(entries, p));
        if (format == "json") {
          text += trees.dump(2) + "\n";
        } else {
          text += "\nprovenance\n";
          for (const auto& t : trees) text += format_provenance(t);
        }
      }
      out << text;
      if (!report_output.empty()) write_output("report", report_output, text);
    }

    manifest.append_to(manifest_path);
    return 0;
  } catch (const AuthError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const server::NothingToReportError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace plaba::cli
