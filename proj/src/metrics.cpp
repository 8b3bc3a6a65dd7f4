#include "plaba/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <thread>

#include "plaba/error.hpp"

namespace plaba::metrics {

using nlohmann::json;
using textproc::NGram;
using textproc::NGramCounts;

Smoothing parse_smoothing(const std::string& name) {
  if (name == "none") return Smoothing::kNone;
  if (name == "add-one-on-zero") return Smoothing::kAddOneOnZero;
  throw ValidationError("unknown smoothing: " + name + " (expected none|add-one-on-zero)");
}

std::string smoothing_name(Smoothing smoothing) {
  return smoothing == Smoothing::kNone ? "none" : "add-one-on-zero";
}

MultiRef parse_multi_ref(const std::string& name) {
  if (name == "best") return MultiRef::kBest;
  if (name == "average") return MultiRef::kAverage;
  throw ValidationError("unknown multi-reference mode: " + name + " (expected best|average)");
}

// ---------------------------------------------------------------------------
// BLEU

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  candidate_len += other.candidate_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
  if (references.empty()) throw ValidationError("BLEU needs at least one reference");
  BleuStats stats;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    NGramCounts cand(candidate, n);
    std::map<NGram, int> max_ref;
    for (const auto& ref : references) {
      const NGramCounts rc(ref, n);
      for (const auto& [gram, count] : rc.counts()) {
        int& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    double matched = 0;
    for (const auto& [gram, count] : cand.counts()) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(count, it->second);
    }
    stats.matches[n - 1] = matched;
    stats.totals[n - 1] = static_cast<double>(cand.total());
  }
  const std::size_t c = candidate.size();
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    std::size_t r = ref.size();
    std::size_t dr = r > c ? r - c : c - r;
    std::size_t db = best > c ? best - c : c - best;
    if (dr < db || (dr == db && r < best)) best = r;
  }
  stats.candidate_len = static_cast<double>(c);
  stats.ref_len = static_cast<double>(best);
  return stats;
}

BleuScore bleu_from_stats(const BleuStats& stats, Smoothing smoothing) {
  BleuScore out;
  out.stats = stats;
  out.candidate_len = static_cast<std::size_t>(stats.candidate_len);
  out.effective_ref_len = static_cast<std::size_t>(stats.ref_len);

  const double c = stats.candidate_len;
  const double r = stats.ref_len;
  if (c >= r) {
    out.brevity_penalty = 1.0;
  } else {
    out.brevity_penalty = c == 0 ? 0.0 : std::exp(1.0 - r / c);
  }
  if (c == 0) {
    out.score = 0;
    return out;
  }

  // Orders with no candidate n-grams at all (candidate shorter than n) are
  // left out of the geometric mean.
  double log_sum = 0;
  std::size_t orders = 0;
  bool any_zero = false;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (stats.totals[n] == 0) continue;
    ++orders;
    double p = 0;
    if (stats.matches[n] > 0) {
      p = stats.matches[n] / stats.totals[n];
    } else if (smoothing == Smoothing::kAddOneOnZero) {
      p = 1.0 / (stats.totals[n] + 1.0);
    }
    out.precisions[n] = p;
    if (p == 0) {
      any_zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  out.score = any_zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
  return out;
}

BleuScore sentence_bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                        Smoothing smoothing) {
  return bleu_from_stats(bleu_stats(candidate, references), smoothing);
}

BleuScore corpus_bleu(const std::vector<BleuPair>& pairs, Smoothing smoothing) {
  if (pairs.empty()) throw ValidationError("corpus BLEU over an empty list");
  BleuStats total;
  for (const auto& [cand, refs] : pairs) total += bleu_stats(cand, refs);
  return bleu_from_stats(total, smoothing);
}

// ---------------------------------------------------------------------------
// ROUGE

namespace {

double safe_div(double num, double den) { return den == 0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

RougeScore make_rouge(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  s.precision = safe_div(overlap, cand_total);
  s.recall = safe_div(overlap, ref_total);
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

RougeScore combine(const std::vector<RougeScore>& per_ref, MultiRef mode) {
  if (mode == MultiRef::kBest) {
    RougeScore best = per_ref.front();
    for (const auto& s : per_ref) {
      if (s.f1 > best.f1) best = s;
    }
    return best;
  }
  RougeScore mean;
  for (const auto& s : per_ref) {
    mean.precision += s.precision;
    mean.recall += s.recall;
    mean.f1 += s.f1;
  }
  const double k = static_cast<double>(per_ref.size());
  mean.precision /= k;
  mean.recall /= k;
  mean.f1 /= k;
  return mean;
}

}  // namespace

RougeScore rouge_n(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                   std::size_t n, MultiRef multi_ref) {
  if (references.empty()) throw ValidationError("ROUGE needs at least one reference");
  NGramCounts cand(candidate, n);
  std::vector<RougeScore> per_ref;
  for (const auto& ref : references) {
    NGramCounts r(ref, n);
    double overlap = 0;
    for (const auto& [gram, count] : cand.counts()) overlap += std::min(count, r.count(gram));
    per_ref.push_back(make_rouge(overlap, static_cast<double>(cand.total()),
                                 static_cast<double>(r.total())));
  }
  return combine(per_ref, multi_ref);
}

RougeScore rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                   MultiRef multi_ref) {
  if (references.empty()) throw ValidationError("ROUGE needs at least one reference");
  std::vector<RougeScore> per_ref;
  for (const auto& ref : references) {
    auto lcs = static_cast<double>(textproc::lcs_length(candidate, ref));
    per_ref.push_back(
        make_rouge(lcs, static_cast<double>(candidate.size()), static_cast<double>(ref.size())));
  }
  return combine(per_ref, multi_ref);
}

// ---------------------------------------------------------------------------
// SARI

namespace {

// Ratio with the vacuous-agreement convention: a zero denominator scores 1
// when the paired side is empty too, otherwise 0.
double vacuous_ratio(double num, double den, bool paired_empty) {
  if (den == 0) return paired_empty ? 1.0 : 0.0;
  return num / den;
}

SariOrderScore sari_order(const TokenSeq& source, const TokenSeq& candidate,
                          const std::vector<TokenSeq>& references, std::size_t n) {
  NGramCounts s(source, n);
  NGramCounts c(candidate, n);
  const double k = static_cast<double>(references.size());
  std::map<NGram, double> r;  // fractional reference counts
  for (const auto& ref : references) {
    const NGramCounts rc(ref, n);
    for (const auto& [gram, count] : rc.counts()) r[gram] += count / k;
  }
  auto r_of = [&](const NGram& g) {
    auto it = r.find(g);
    return it == r.end() ? 0.0 : it->second;
  };

  SariOrderScore out;

  // Add (set-valued).
  double added = 0, added_good = 0, ref_new = 0;
  for (const auto& [gram, _] : c.counts()) {
    if (s.count(gram) > 0) continue;
    added += 1;
    if (r_of(gram) > 0) added_good += 1;
  }
  for (const auto& [gram, _] : r) {
    if (s.count(gram) == 0) ref_new += 1;
  }
  out.add_precision = vacuous_ratio(added_good, added, ref_new == 0);
  out.add_recall = vacuous_ratio(added_good, ref_new, added == 0);
  out.add_f1 = f1_of(out.add_precision, out.add_recall);

  // Keep.
  double kept_distinct = 0, keep_precision_sum = 0, keep_good_sum = 0, keep_target_sum = 0;
  for (const auto& [gram, sc] : s.counts()) {
    const double rg = r_of(gram);
    keep_target_sum += std::min(static_cast<double>(sc), rg);
    const double kept = std::min(sc, c.count(gram));
    if (kept <= 0) continue;
    const double good = std::min(kept, rg);
    kept_distinct += 1;
    keep_precision_sum += good / kept;
    keep_good_sum += good;
  }
  out.keep_precision = vacuous_ratio(keep_precision_sum, kept_distinct, keep_target_sum == 0);
  out.keep_recall = vacuous_ratio(keep_good_sum, keep_target_sum, kept_distinct == 0);
  out.keep_f1 = f1_of(out.keep_precision, out.keep_recall);

  // Delete (precision only).
  double deleted_distinct = 0, del_precision_sum = 0;
  bool del_target_empty = true;
  for (const auto& [gram, sc] : s.counts()) {
    const double rg = r_of(gram);
    if (static_cast<double>(sc) - rg > 0) del_target_empty = false;
    const double deleted = sc - std::min(sc, c.count(gram));
    if (deleted <= 0) continue;
    deleted_distinct += 1;
    del_precision_sum += std::min(deleted, std::max(0.0, sc - rg)) / deleted;
  }
  out.del_precision = vacuous_ratio(del_precision_sum, deleted_distinct, del_target_empty);
  return out;
}

}  // namespace

SariScore sari(const TokenSeq& source, const TokenSeq& candidate,
               const std::vector<TokenSeq>& references) {
  if (references.empty()) throw ValidationError("SARI needs at least one reference");
  SariScore out;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const auto& o = out.per_order[n - 1] = sari_order(source, candidate, references, n);
    out.f_add += o.add_f1;
    out.f_keep += o.keep_f1;
    out.p_del += o.del_precision;
  }
  out.f_add /= kMaxOrder;
  out.f_keep /= kMaxOrder;
  out.p_del /= kMaxOrder;
  out.score = (out.f_add + out.f_keep + out.p_del) / 3.0;
  return out;
}

// ---------------------------------------------------------------------------
// Run evaluation

namespace {

struct ScoringJob {
  std::string abstract_id;
  std::size_t sentence_index;
  TokenSeq source;
  TokenSeq candidate;
  std::vector<TokenSeq> references;
};

SentenceMetrics score_job(const ScoringJob& job, const ScoringConfig& config) {
  SentenceMetrics m;
  m.abstract_id = job.abstract_id;
  m.sentence_index = job.sentence_index;
  m.sari = sari(job.source, job.candidate, job.references);
  m.rouge1 = rouge_n(job.candidate, job.references, 1, config.multi_ref);
  m.rouge2 = rouge_n(job.candidate, job.references, 2, config.multi_ref);
  m.rougeL = rouge_l(job.candidate, job.references, config.multi_ref);
  m.bleu = sentence_bleu(job.candidate, job.references, config.sentence_smoothing);
  return m;
}

}  // namespace

MetricsReport evaluate_run(const std::vector<PredictionRecord>& predictions,
                           const corpus::Corpus& corpus, const corpus::CorpusSplit& split,
                           corpus::Section section, const ScoringConfig& config) {
  std::vector<std::string> ids = split.section(section);
  std::sort(ids.begin(), ids.end());
  const std::set<std::string> in_section(ids.begin(), ids.end());

  MetricsReport report;
  report.section = corpus::section_name(section);
  report.corpus_smoothing = config.corpus_smoothing;

  std::map<std::pair<std::string, std::size_t>, const PredictionRecord*> by_key;
  for (const auto& p : predictions) {
    if (report.system_id.empty()) report.system_id = p.system_id;
    if (p.system_id != report.system_id) {
      throw ValidationError("predictions mix systems " + report.system_id + " and " + p.system_id);
    }
    const auto* abstract = corpus.find_abstract(p.abstract_id);
    if (!abstract || !in_section.contains(p.abstract_id) ||
        p.sentence_index >= abstract->sentences.size()) {
      throw ValidationError("prediction references unknown pair " + p.abstract_id + "#" +
                            std::to_string(p.sentence_index) + " in section " + report.section);
    }
    if (!by_key.emplace(std::make_pair(p.abstract_id, p.sentence_index), &p).second) {
      throw ValidationError("duplicate prediction for " + p.abstract_id + "#" +
                            std::to_string(p.sentence_index));
    }
  }

  std::vector<ScoringJob> jobs;
  for (const auto& id : ids) {
    const auto* abstract = corpus.find_abstract(id);
    if (!abstract) throw ValidationError("split names unknown abstract " + id);
    const auto adaptations = corpus.adaptations_of(id);
    for (std::size_t k = 0; k < abstract->sentences.size(); ++k) {
      ++report.n_expected;
      auto it = by_key.find({id, k});
      if (it == by_key.end()) {
        report.gaps.push_back({id, k, "missing"});
        continue;
      }
      if (it->second->error) {
        report.gaps.push_back({id, k, *it->second->error});
        continue;
      }
      if (adaptations.empty()) {
        report.gaps.push_back({id, k, "no reference adaptation"});
        continue;
      }
      ScoringJob job{id, k, textproc::tokenize(abstract->sentences[k], config.tokenizer),
                     textproc::tokenize(it->second->candidate_text(), config.tokenizer), {}};
      for (const auto* ad : adaptations) {
        job.references.push_back(textproc::tokenize(ad->target_text(k), config.tokenizer));
      }
      jobs.push_back(std::move(job));
    }
  }
  if (jobs.empty()) {
    throw ValidationError("zero coverage: no scorable predictions in section " + report.section);
  }

  report.per_sentence.resize(jobs.size());
  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, jobs.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) report.per_sentence[i] = score_job(jobs[i], config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          report.per_sentence[i] = score_job(jobs[i], config);
        }
      });
    }
  }
  report.aggregates = aggregate(report.per_sentence, config.corpus_smoothing);
  return report;
}

MetricsAggregates aggregate(const std::vector<SentenceMetrics>& per_sentence,
                            Smoothing corpus_smoothing) {
  MetricsAggregates agg;
  agg.n_scored = per_sentence.size();
  if (per_sentence.empty()) return agg;
  BleuStats total;
  for (const auto& m : per_sentence) {
    agg.sari += m.sari.score;
    agg.sari_add += m.sari.f_add;
    agg.sari_keep += m.sari.f_keep;
    agg.sari_del += m.sari.p_del;
    agg.rouge1_f += m.rouge1.f1;
    agg.rouge2_f += m.rouge2.f1;
    agg.rougeL_f += m.rougeL.f1;
    total += m.bleu.stats;
  }
  const double n = static_cast<double>(per_sentence.size());
  agg.sari /= n;
  agg.sari_add /= n;
  agg.sari_keep /= n;
  agg.sari_del /= n;
  agg.rouge1_f /= n;
  agg.rouge2_f /= n;
  agg.rougeL_f /= n;
  agg.corpus_bleu = bleu_from_stats(total, corpus_smoothing);
  return agg;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json rouge_json(const RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

RougeScore rouge_from(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json bleu_json(const BleuScore& b) {
  return {{"score", b.score},
          {"precisions", b.precisions},
          {"brevity_penalty", b.brevity_penalty},
          {"candidate_len", b.candidate_len},
          {"effective_ref_len", b.effective_ref_len},
          {"matches", b.stats.matches},
          {"totals", b.stats.totals}};
}

BleuScore bleu_from(const json& j) {
  BleuScore b;
  b.score = j.at("score").get<double>();
  b.precisions = j.at("precisions").get<std::array<double, kMaxOrder>>();
  b.brevity_penalty = j.at("brevity_penalty").get<double>();
  b.candidate_len = j.at("candidate_len").get<std::size_t>();
  b.effective_ref_len = j.at("effective_ref_len").get<std::size_t>();
  b.stats.matches = j.at("matches").get<std::array<double, kMaxOrder>>();
  b.stats.totals = j.at("totals").get<std::array<double, kMaxOrder>>();
  b.stats.candidate_len = static_cast<double>(b.candidate_len);
  b.stats.ref_len = static_cast<double>(b.effective_ref_len);
  return b;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
  const auto& a = report.aggregates;
  json per_sentence = json::array();
  for (const auto& m : report.per_sentence) {
    per_sentence.push_back({{"abstract_id", m.abstract_id},
                            {"sentence_index", m.sentence_index},
                            {"sari",
                             {{"score", m.sari.score},
                              {"f_add", m.sari.f_add},
                              {"f_keep", m.sari.f_keep},
                              {"p_del", m.sari.p_del}}},
                            {"rouge1", rouge_json(m.rouge1)},
                            {"rouge2", rouge_json(m.rouge2)},
                            {"rougeL", rouge_json(m.rougeL)},
                            {"bleu", bleu_json(m.bleu)}});
  }
  json gaps = json::array();
  for (const auto& g : report.gaps) {
    gaps.push_back(
        {{"abstract_id", g.abstract_id}, {"sentence_index", g.sentence_index}, {"reason", g.reason}});
  }
  return {{"system_id", report.system_id},
          {"section", report.section},
          {"bleu_smoothing", smoothing_name(report.corpus_smoothing)},
          {"coverage", {{"n_expected", report.n_expected}, {"n_scored", a.n_scored}, {"gaps", gaps}}},
          {"aggregates",
           {{"sari", a.sari},
            {"sari_add", a.sari_add},
            {"sari_keep", a.sari_keep},
            {"sari_del", a.sari_del},
            {"corpus_bleu", bleu_json(a.corpus_bleu)},
            {"rouge1_f", a.rouge1_f},
            {"rouge2_f", a.rouge2_f},
            {"rougeL_f", a.rougeL_f}}},
          {"per_sentence", per_sentence}};
}

MetricsReport report_from_json(const json& doc) {
  try {
    MetricsReport r;
    r.system_id = doc.at("system_id").get<std::string>();
    r.section = doc.at("section").get<std::string>();
    r.corpus_smoothing = parse_smoothing(doc.at("bleu_smoothing").get<std::string>());
    const auto& cov = doc.at("coverage");
    r.n_expected = cov.at("n_expected").get<std::size_t>();
    for (const auto& g : cov.at("gaps")) {
      r.gaps.push_back({g.at("abstract_id").get<std::string>(),
                        g.at("sentence_index").get<std::size_t>(),
                        g.at("reason").get<std::string>()});
    }
    for (const auto& m : doc.at("per_sentence")) {
      SentenceMetrics s;
      s.abstract_id = m.at("abstract_id").get<std::string>();
      s.sentence_index = m.at("sentence_index").get<std::size_t>();
      const auto& sj = m.at("sari");
      s.sari.score = sj.at("score").get<double>();
      s.sari.f_add = sj.at("f_add").get<double>();
      s.sari.f_keep = sj.at("f_keep").get<double>();
      s.sari.p_del = sj.at("p_del").get<double>();
      s.rouge1 = rouge_from(m.at("rouge1"));
      s.rouge2 = rouge_from(m.at("rouge2"));
      s.rougeL = rouge_from(m.at("rougeL"));
      s.bleu = bleu_from(m.at("bleu"));
      r.per_sentence.push_back(std::move(s));
    }
    const auto& a = doc.at("aggregates");
    r.aggregates.n_scored = cov.at("n_scored").get<std::size_t>();
    r.aggregates.sari = a.at("sari").get<double>();
    r.aggregates.sari_add = a.at("sari_add").get<double>();
    r.aggregates.sari_keep = a.at("sari_keep").get<double>();
    r.aggregates.sari_del = a.at("sari_del").get<double>();
    r.aggregates.corpus_bleu = bleu_from(a.at("corpus_bleu"));
    r.aggregates.rouge1_f = a.at("rouge1_f").get<double>();
    r.aggregates.rouge2_f = a.at("rouge2_f").get<double>();
    r.aggregates.rougeL_f = a.at("rougeL_f").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed metrics report: ") + e.what());
  }
}

std::string report_json_text(const MetricsReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::string format_report_table(const std::vector<MetricsReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.system_id.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %9s  %9s  %9s\n", static_cast<int>(width),
                "system", "SARI", "BLEU", "ROUGE-1 F", "ROUGE-2 F", "ROUGE-L F");
  out += buf;
  for (const auto& r : reports) {
    const auto& a = r.aggregates;
    std::snprintf(buf, sizeof buf, "%-*s  %7.2f  %7.2f  %9.2f  %9.2f  %9.2f\n",
                  static_cast<int>(width), r.system_id.c_str(), 100 * a.sari,
                  100 * a.corpus_bleu.score, 100 * a.rouge1_f, 100 * a.rouge2_f, 100 * a.rougeL_f);
    out += buf;
  }
  return out;
}

}  // namespace plaba::metrics
