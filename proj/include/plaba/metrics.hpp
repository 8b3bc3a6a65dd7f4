#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plaba/corpus.hpp"
#include "plaba/prediction.hpp"
#include "plaba/textproc.hpp"

namespace plaba::metrics {

using textproc::TokenSeq;

inline constexpr std::size_t kMaxOrder = 4;

enum class Smoothing { kNone, kAddOneOnZero };
enum class MultiRef { kBest, kAverage };

Smoothing parse_smoothing(const std::string& name);
std::string smoothing_name(Smoothing smoothing);
MultiRef parse_multi_ref(const std::string& name);

// Sufficient statistics for BLEU. Corpus BLEU sums these over sentences
// before taking any ratio.
struct BleuStats {
  std::array<double, kMaxOrder> matches{};
  std::array<double, kMaxOrder> totals{};
  double candidate_len = 0;
  double ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
};

struct BleuScore {
  double score = 0;
  std::array<double, kMaxOrder> precisions{};
  double brevity_penalty = 1;
  std::size_t candidate_len = 0;
  std::size_t effective_ref_len = 0;
  BleuStats stats;
};

BleuStats bleu_stats(const TokenSeq& candidate, const std::vector<TokenSeq>& references);
BleuScore bleu_from_stats(const BleuStats& stats, Smoothing smoothing = Smoothing::kNone);

// Clipped n-gram precisions (n = 1..4) with brevity penalty against the
// reference length closest to the candidate (ties go to the shorter one).
// An order the candidate is too short to have is skipped, not zero.
BleuScore sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                        Smoothing smoothing = Smoothing::kNone);

using BleuPair = std::pair<TokenSeq, std::vector<TokenSeq>>;
BleuScore corpus_bleu(const std::vector<BleuPair>& pairs, Smoothing smoothing = Smoothing::kNone);

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

RougeScore rouge_n(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                   std::size_t n, MultiRef multi_ref = MultiRef::kBest);
RougeScore rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                   MultiRef multi_ref = MultiRef::kBest);

struct SariOrderScore {
  double add_precision = 0, add_recall = 0, add_f1 = 0;
  double keep_precision = 0, keep_recall = 0, keep_f1 = 0;
  double del_precision = 0;
};

struct SariScore {
  double score = 0;
  double f_add = 0;
  double f_keep = 0;
  double p_del = 0;
  std::array<SariOrderScore, kMaxOrder> per_order{};
};

// Add: set-valued, F1 against reference n-grams absent from the source.
// Keep: multiset, precision averaged over kept n-grams and recall summed,
// both against fractional reference counts. Delete: precision only.
// Zero denominators score 1 when the paired multiset is also empty, else 0.
SariScore sari(const TokenSeq& source, const TokenSeq& candidate,
               const std::vector<TokenSeq>& references);

// ---------------------------------------------------------------------------
// Run evaluation

struct ScoringConfig {
  textproc::TokenizerConfig tokenizer;
  Smoothing sentence_smoothing = Smoothing::kNone;
  Smoothing corpus_smoothing = Smoothing::kNone;
  MultiRef multi_ref = MultiRef::kBest;
  std::size_t threads = 1;
};

struct SentenceMetrics {
  std::string abstract_id;
  std::size_t sentence_index = 0;
  SariScore sari;
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;
  BleuScore bleu;
};

struct CoverageGap {
  std::string abstract_id;
  std::size_t sentence_index = 0;
  std::string reason;  // "missing" or the backend error message
};

struct MetricsAggregates {
  std::size_t n_scored = 0;
  double sari = 0;
  double sari_add = 0;
  double sari_keep = 0;
  double sari_del = 0;
  BleuScore corpus_bleu;
  double rouge1_f = 0;
  double rouge2_f = 0;
  double rougeL_f = 0;
};

struct MetricsReport {
  std::string system_id;
  std::string section;
  std::size_t n_expected = 0;
  Smoothing corpus_smoothing = Smoothing::kNone;
  std::vector<SentenceMetrics> per_sentence;
  std::vector<CoverageGap> gaps;
  MetricsAggregates aggregates;
};

// Scores every prediction in the chosen section against all adaptations of
// its source sentence. Throws ValidationError for predictions outside the
// section, duplicate keys, mixed system ids, or zero coverage.
MetricsReport evaluate_run(const std::vector<PredictionRecord>& predictions,
                           const corpus::Corpus& corpus, const corpus::CorpusSplit& split,
                           corpus::Section section, const ScoringConfig& config = {});

MetricsAggregates aggregate(const std::vector<SentenceMetrics>& per_sentence,
                            Smoothing corpus_smoothing = Smoothing::kNone);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& doc);

// Canonical serialized form shared by the CLI and the server.
std::string report_json_text(const MetricsReport& report);

// Aligned table: system, SARI, BLEU, ROUGE-1 F, ROUGE-2 F, ROUGE-L F (x100).
std::string format_report_table(const std::vector<MetricsReport>& reports);

}  // namespace plaba::metrics
