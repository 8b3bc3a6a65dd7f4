#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "plaba/adapt.hpp"
#include "plaba/error.hpp"
#include "plaba/textproc.hpp"
#include "plaba/util.hpp"

namespace plaba::adapt {

using nlohmann::json;

namespace {

std::vector<const corpus::SourceAbstract*> section_abstracts(const corpus::Corpus& corpus,
                                                             const corpus::CorpusSplit& split,
                                                             corpus::Section section) {
  std::vector<std::string> ids = split.section(section);
  std::sort(ids.begin(), ids.end());
  std::vector<const corpus::SourceAbstract*> out;
  for (const auto& id : ids) {
    const auto* a = corpus.find_abstract(id);
    if (!a) throw ValidationError("split names unknown abstract " + id);
    out.push_back(a);
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

GenerateResult generate_run(const RuleBasedConfig& rules, const corpus::Corpus& corpus,
                            const corpus::CorpusSplit& split, const GenerateRequest& request) {
  const auto abstracts = section_abstracts(corpus, split, request.section);
  const std::string lexicon_digest = sha256_hex(lexicon_to_json(rules.lexicon).dump());
  const json params = {{"backend", "rule-based"}, {"lexicon_sha256", lexicon_digest}};

  std::vector<std::vector<PredictionRecord>> per_abstract(abstracts.size());
  // mention_state is per abstract and order dependent, so each abstract runs
  // sequentially; different abstracts run in parallel.
  parallel_for(abstracts.size(), rules.threads, [&](std::size_t a) {
    const auto& abstract = *abstracts[a];
    MentionState mentions;
    for (std::size_t k = 0; k < abstract.sentences.size(); ++k) {
      auto out = rule_based_adapt(abstract.sentences[k], rules.lexicon, std::move(mentions));
      mentions = std::move(out.mention_state);
      PredictionRecord rec;
      rec.system_id = request.system_id;
      rec.abstract_id = abstract.id;
      rec.sentence_index = k;
      rec.output_sentences = std::move(out.output_sentences);
      rec.prompt_hash = sha256_hex("rule-based\n" + lexicon_digest + "\n" + abstract.sentences[k]);
      rec.model_params = params;
      per_abstract[a].push_back(std::move(rec));
    }
  });

  GenerateResult result;
  for (auto& recs : per_abstract) {
    for (auto& r : recs) result.records.push_back(std::move(r));
  }
  return result;
}

GenerateResult generate_run(const RemoteConfig& remote, const corpus::Corpus& corpus,
                            const corpus::CorpusSplit& split, const GenerateRequest& request) {
  remote.backend.validate();
  remote.prompt.validate();
  std::shared_ptr<GenerationBackend> client = remote.client;
  if (!client) client = std::make_shared<HttpBackend>(remote.backend);
  std::optional<ResponseCache> cache;
  if (remote.cache_dir) cache.emplace(*remote.cache_dir);

  struct Job {
    const corpus::SourceAbstract* abstract;
    std::size_t index;
    std::string prompt;
    std::string hash;
  };
  std::vector<Job> jobs;
  for (const auto* abstract : section_abstracts(corpus, split, request.section)) {
    const auto& question = corpus.question_of(*abstract);
    for (std::size_t k = 0; k < abstract->sentences.size(); ++k) {
      std::string prompt = render_prompt(question, abstract->sentences[k], remote.prompt);
      std::string hash = prompt_hash(prompt);
      jobs.push_back({abstract, k, std::move(prompt), std::move(hash)});
    }
  }

  GenerateResult result;
  result.records.resize(jobs.size());
  std::atomic<std::size_t> requests{0}, cache_hits{0}, retries{0}, failures{0}, transient_failures{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::exception_ptr fatal;
  const std::string& model = remote.backend.model_name;
  const auto abbreviations =
      remote.abbreviations.empty() ? textproc::default_abbreviations() : remote.abbreviations;

  parallel_for(jobs.size(), remote.backend.max_concurrency, [&](std::size_t i) {
    if (abort) return;
    const Job& job = jobs[i];
    PredictionRecord& rec = result.records[i];
    rec.system_id = request.system_id;
    rec.abstract_id = job.abstract->id;
    rec.sentence_index = job.index;
    rec.prompt_hash = job.hash;
    rec.model_params = remote.model_params;

    auto accept = [&](const std::string& text) {
      rec.output_sentences = textproc::split_sentences(text, abbreviations);
    };
    if (cache) {
      if (auto hit = cache->get(model, job.hash, remote.model_params)) {
        ++cache_hits;
        accept(*hit);
        return;
      }
    }
    for (std::size_t attempt = 0;; ++attempt) {
      if (abort) return;
      ++requests;
      try {
        std::string text = client->generate(model, job.prompt, remote.model_params);
        if (cache) cache->put(model, job.hash, remote.model_params, text);
        accept(text);
        return;
      } catch (const AuthError&) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
        abort = true;
        return;
      } catch (const MalformedResponseError& e) {
        ++failures;
        rec.error = e.what();
        return;
      } catch (const TransientBackendError& e) {
        if (attempt >= remote.backend.retry_limit) {
          ++failures;
          ++transient_failures;
          rec.error = "failed after " + std::to_string(attempt + 1) + " attempts: " + e.what();
          return;
        }
        ++retries;
        {
          std::lock_guard lock(mu);
          result.retry_log.push_back({job.abstract->id, job.index, attempt + 1, e.what()});
        }
        std::this_thread::sleep_for(remote.backend.retry_backoff * (attempt + 1));
      }
    }
  });

  if (fatal) std::rethrow_exception(fatal);
  result.requests = requests;
  result.cache_hits = cache_hits;
  result.retries = retries;
  result.failures = failures;
  if (!jobs.empty() && transient_failures == jobs.size()) {
    throw BackendError("endpoint unreachable: every request to " + remote.backend.endpoint +
                       " failed (" + *result.records.front().error + ")");
  }
  std::sort(result.retry_log.begin(), result.retry_log.end(), [](const auto& a, const auto& b) {
    return std::tie(a.abstract_id, a.sentence_index, a.attempt) <
           std::tie(b.abstract_id, b.sentence_index, b.attempt);
  });
  return result;
}

}  // namespace plaba::adapt
