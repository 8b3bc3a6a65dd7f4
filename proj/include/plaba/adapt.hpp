#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plaba/corpus.hpp"
#include "plaba/prediction.hpp"

namespace plaba::adapt {

// ---------------------------------------------------------------------------
// Prompts

enum class PromptKind { kInstruction, kGuideline };

struct PromptTemplate {
  std::string id;
  PromptKind kind = PromptKind::kInstruction;
  // For instruction templates: must contain {question} and {sentence}.
  std::string instruction_text;
  std::string guideline_text;
  std::optional<std::pair<std::string, std::string>> example;  // (source, adaptation)

  // Throws ValidationError if the kind-specific requirements are not met.
  void validate() const;
};

inline constexpr const char* kInstructionPrefix =
    "Simplify the following sentence given the context of the question ";

PromptTemplate default_instruction_template();
// Bundled guideline template (data/guideline_template.json, compiled in).
PromptTemplate default_guideline_template();

PromptTemplate template_from_json(const nlohmann::json& doc);
nlohmann::json template_to_json(const PromptTemplate& tmpl);
PromptTemplate load_template(const std::filesystem::path& path);

// "Simplify the following sentence given the context of the question <q>\n<sentence>"
std::string build_instruction_prompt(const corpus::ConsumerQuestion& question,
                                     const std::string& sentence);
std::string build_instruction_prompt(const corpus::ConsumerQuestion& question,
                                     const std::string& sentence, const PromptTemplate& tmpl);

// Guidelines, the single worked example, the question and the target sentence,
// each under its own "### " heading, in that order.
std::string build_guideline_prompt(const corpus::ConsumerQuestion& question,
                                   const std::string& sentence, const PromptTemplate& tmpl);

std::string render_prompt(const corpus::ConsumerQuestion& question, const std::string& sentence,
                          const PromptTemplate& tmpl);

std::string prompt_hash(const std::string& prompt);

// ---------------------------------------------------------------------------
// Rule-based guideline adapter

struct GuidelineLexicon {
  // Keys are stored lowercased; matching is case-insensitive on whole tokens.
  std::map<std::string, std::string> abbreviations;
  std::map<std::string, std::string> jargon_glosses;

  void add_abbreviation(const std::string& short_form, const std::string& long_form);
  void add_gloss(const std::string& term, const std::string& gloss);
};

GuidelineLexicon lexicon_from_json(const nlohmann::json& doc);
nlohmann::json lexicon_to_json(const GuidelineLexicon& lexicon);
GuidelineLexicon load_lexicon(const std::filesystem::path& path);

// Terms already glossed earlier in the same abstract (lowercased).
using MentionState = std::set<std::string>;

struct RuleOutput {
  std::vector<std::string> output_sentences;
  MentionState mention_state;
};

// Expands abbreviations, glosses first mentions of jargon as "T (gloss)",
// then strips statistical figures (p-values, confidence intervals, n=...)
// together with any parenthetical they leave empty. An output with no words
// left is treated as a dropped sentence.
RuleOutput rule_based_adapt(const std::string& sentence, const GuidelineLexicon& lexicon,
                            MentionState mention_state);

// Just the statistical-figure removal step.
std::string strip_statistics(const std::string& sentence);

// ---------------------------------------------------------------------------
// Remote backends

struct BackendConfig {
  std::string endpoint;
  std::string model_name;
  std::size_t max_concurrency = 4;
  std::chrono::milliseconds request_timeout{60000};
  std::size_t retry_limit = 3;
  // Name of the environment variable holding the bearer token; empty = none.
  std::string credentials_env;
  std::chrono::milliseconds retry_backoff{200};

  void validate() const;
};

// Transient failure (connection refused, timeout, 5xx); retried.
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Response arrived but does not match {"text": string}; not retried.
class MalformedResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // Throws TransientBackendError, MalformedResponseError or AuthError.
  virtual std::string generate(const std::string& model, const std::string& prompt,
                               const nlohmann::json& params) = 0;
};

// POST {"model","prompt","params"} -> {"text"} over HTTP(S).
class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string generate(const std::string& model, const std::string& prompt,
                       const nlohmann::json& params) override;

 private:
  BackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string bearer_;
};

// Parses a backend response body; throws MalformedResponseError quoting the
// raw payload.
std::string parse_backend_response(const std::string& body);

// Disk cache of remote responses keyed by (model, prompt hash, params).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& model, const std::string& prompt_hash,
                                 const nlohmann::json& params) const;
  void put(const std::string& model, const std::string& prompt_hash,
           const nlohmann::json& params, const std::string& text) const;

  static std::string key(const std::string& model, const std::string& prompt_hash,
                         const nlohmann::json& params);

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Batch driver

struct RuleBasedConfig {
  GuidelineLexicon lexicon;
  std::size_t threads = 1;
};

struct RemoteConfig {
  BackendConfig backend;
  std::shared_ptr<GenerationBackend> client;  // defaults to HttpBackend(backend)
  PromptTemplate prompt = default_guideline_template();
  nlohmann::json model_params = nlohmann::json::object();
  std::optional<std::filesystem::path> cache_dir;
  std::set<std::string> abbreviations;  // for splitting multi-sentence outputs
};

struct GenerateRequest {
  std::string system_id;
  corpus::Section section = corpus::Section::kTest;
};

struct GenerateLogEntry {
  std::string abstract_id;
  std::size_t sentence_index = 0;
  std::size_t attempt = 0;
  std::string message;
};

struct GenerateResult {
  std::vector<PredictionRecord> records;
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
  std::size_t failures = 0;
  std::vector<GenerateLogEntry> retry_log;
};

// One record per (abstract, sentence) of the section, ordered by abstract id
// then sentence index.
GenerateResult generate_run(const RuleBasedConfig& rules, const corpus::Corpus& corpus,
                            const corpus::CorpusSplit& split, const GenerateRequest& request);

// Throws AuthError on 401/403 and BackendError when no request reached the
// endpoint. Other per-sentence failures become records with `error` set.
GenerateResult generate_run(const RemoteConfig& remote, const corpus::Corpus& corpus,
                            const corpus::CorpusSplit& split, const GenerateRequest& request);

}  // namespace plaba::adapt
