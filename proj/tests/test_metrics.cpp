#include <algorithm>
#include <chrono>

#include "doctest.h"
#include "oracle.hpp"
#include "plaba/error.hpp"
#include "plaba/metrics.hpp"
#include "support.hpp"

using namespace plaba;
using namespace plaba::metrics;
using Seq = std::vector<std::string>;

namespace {

Seq toks(const std::string& s) { return textproc::tokenize(s); }

void check_bleu(const BleuScore& got, const oracle::Bleu& want) {
  CHECK(got.score == doctest::Approx(want.score).epsilon(1e-9));
  CHECK(got.brevity_penalty == doctest::Approx(want.bp).epsilon(1e-9));
  for (int n = 0; n < 4; ++n) CHECK(got.precisions[n] == doctest::Approx(want.p[n]).epsilon(1e-9));
}

}  // namespace

TEST_CASE("bleu: identity scores one") {
  Seq s = toks("the cat sat on the mat");
  auto b = sentence_bleu(s, {s});
  CHECK(b.score == 1.0);
  CHECK(b.brevity_penalty == 1.0);
  CHECK(b.candidate_len == 6);
  CHECK(b.effective_ref_len == 6);
}

TEST_CASE("bleu: short identity still scores one") {
  Seq s = {"a", "b"};
  CHECK(sentence_bleu(s, {s}).score == 1.0);
}

TEST_CASE("bleu: disjoint candidate scores zero") {
  auto b = sentence_bleu(toks("x y z w"), {toks("a b c d")});
  CHECK(b.score == 0.0);
  CHECK(b.precisions[0] == 0.0);
}

TEST_CASE("bleu: clipped unigram precision") {
  auto b = sentence_bleu({"the", "the", "the"}, {{"the", "cat"}});
  CHECK(b.precisions[0] == 1.0 / 3.0);
  CHECK(b.stats.matches[0] == 1);
  CHECK(b.stats.totals[0] == 3);
  auto want = oracle::bleu({"the", "the", "the"}, {{"the", "cat"}});
  check_bleu(b, want);
}

TEST_CASE("bleu: empty candidate") {
  auto b = sentence_bleu({}, {{"a", "b"}});
  CHECK(b.score == 0.0);
  for (double p : b.precisions) CHECK(p == 0.0);
}

TEST_CASE("bleu: brevity penalty uses closest reference, shorter on ties") {
  Seq cand = {"a", "b", "c", "d"};
  auto b = sentence_bleu(cand, {{"a", "b", "c", "d", "e", "f"}, {"a", "b"}});
  // |6-4| == |2-4|: the shorter reference wins and there is no penalty
  CHECK(b.effective_ref_len == 2);
  CHECK(b.brevity_penalty == 1.0);
  auto b2 = sentence_bleu(cand, {{"a", "b", "c", "d", "e", "f"}});
  CHECK(b2.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)).epsilon(1e-15));
}

TEST_CASE("bleu: requires a reference") {
  CHECK_THROWS_AS(sentence_bleu({"a"}, {}), ValidationError);
  CHECK_THROWS_AS(corpus_bleu({}), ValidationError);
}

TEST_CASE("bleu: add-one-on-zero smoothing") {
  Seq cand = {"a", "b", "x", "c"};
  Seq ref = {"a", "b", "y", "c"};
  CHECK(sentence_bleu(cand, {ref}).score == 0.0);
  auto sm = sentence_bleu(cand, {ref}, Smoothing::kAddOneOnZero);
  CHECK(sm.score > 0.0);
  check_bleu(sm, oracle::bleu(cand, {ref}, true));
  CHECK(sm.precisions[3] == 1.0 / 2.0);  // 0 of 1 four-gram -> 1/(1+1)
}

TEST_CASE("corpus bleu: single pair equals sentence bleu") {
  testsupport::Gen g(11);
  for (int i = 0; i < 100; ++i) {
    Seq c = g.tokens(0, 10, 5);
    std::vector<Seq> refs;
    for (std::size_t k = g.size(1, 3); k > 0; --k) refs.push_back(g.tokens(1, 10, 5));
    auto sb = sentence_bleu(c, refs);
    auto cb = corpus_bleu({{c, refs}});
    CHECK(cb.score == sb.score);
    CHECK(cb.brevity_penalty == sb.brevity_penalty);
  }
}

TEST_CASE("corpus bleu: two pairs against summed counts") {
  std::vector<BleuPair> pairs = {
      {{"the", "cat", "sat", "on", "the", "mat"}, {{"the", "cat", "is", "on", "the", "mat"}}},
      {{"a", "dog", "ran"}, {{"a", "dog", "ran", "fast"}, {"the", "dog", "ran"}}},
  };
  std::vector<std::pair<Seq, std::vector<Seq>>> opairs(pairs.begin(), pairs.end());
  auto want = oracle::corpus_bleu(opairs);
  auto got = corpus_bleu(pairs);
  CHECK(std::abs(got.score - want.score) <= 1e-12);
  // hand counts: unigram 5/6 + 3/3, bigram 3/5 + 2/2
  CHECK(got.stats.matches[0] == 8);
  CHECK(got.stats.totals[0] == 9);
  CHECK(got.stats.matches[1] == 5);
  CHECK(got.stats.totals[1] == 7);
  CHECK(got.effective_ref_len == 9);
}

TEST_CASE("rouge-n: hand-derived overlap") {
  auto r = rouge_n({"a", "b", "c", "d"}, {{"a", "c", "d"}}, 1);
  CHECK(r.recall == 1.0);
  CHECK(r.precision == 0.75);
  CHECK(r.f1 == 6.0 / 7.0);
}

TEST_CASE("rouge: identical and disjoint") {
  Seq s = toks("patients improved after treatment");
  for (auto r : {rouge_n(s, {s}, 1), rouge_n(s, {s}, 2), rouge_l(s, {s})}) {
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
  }
  Seq d = toks("nothing shared here");
  for (auto r : {rouge_n(d, {s}, 1), rouge_n(d, {s}, 2), rouge_l(d, {s})}) {
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
  }
}

TEST_CASE("rouge-l: hand-derived lcs and empty candidate") {
  auto r = rouge_l({"a", "b", "c", "d"}, {{"a", "c", "d"}});
  CHECK(r.recall == 1.0);
  CHECK(r.precision == 0.75);
  CHECK(r.f1 == 6.0 / 7.0);
  auto e = rouge_l({}, {{"a"}});
  CHECK(e.precision == 0.0);
  CHECK(e.recall == 0.0);
  CHECK(e.f1 == 0.0);
}

TEST_CASE("rouge: multi-reference modes") {
  Seq cand = {"a", "b", "c"};
  std::vector<Seq> refs = {{"a", "x", "y"}, {"a", "b", "c", "d"}};
  auto best = rouge_n(cand, refs, 1, MultiRef::kBest);
  CHECK(best.precision == 1.0);
  CHECK(best.recall == 0.75);
  auto avg = rouge_n(cand, refs, 1, MultiRef::kAverage);
  CHECK(avg.precision == doctest::Approx((1.0 / 3 + 1.0) / 2).epsilon(1e-15));
  CHECK(avg.recall == doctest::Approx((1.0 / 3 + 0.75) / 2).epsilon(1e-15));
}

TEST_CASE("rouge-l: monotone in lcs at fixed lengths") {
  // candidate and reference lengths fixed at 4; lcs grows 1..4
  Seq ref = {"a", "b", "c", "d"};
  std::vector<Seq> cands = {{"a", "x", "y", "z"}, {"a", "b", "y", "z"}, {"a", "b", "c", "z"}, ref};
  double prev = -1;
  for (const auto& c : cands) {
    double f = rouge_l(c, {ref}).f1;
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("sari: all identical is one") {
  Seq s = toks("the patient has hypertension");
  auto r = sari(s, s, {s});
  CHECK(r.score == 1.0);
  CHECK(r.f_add == 1.0);
  CHECK(r.f_keep == 1.0);
  CHECK(r.p_del == 1.0);
}

TEST_CASE("sari: perfect deletion is one") {
  auto r = sari({"a", "b", "c"}, {"a", "b"}, {{"a", "b"}});
  CHECK(r.score == 1.0);
}

TEST_CASE("sari: matching the reference beats copying the source") {
  Seq src = toks("the patient has hypertension");
  Seq ref = toks("the patient has high blood pressure");
  auto copy = sari(src, src, {ref});
  auto match = sari(src, ref, {ref});
  CHECK(match.score > copy.score);
  auto oc = oracle::sari(src, src, {ref});
  auto om = oracle::sari(src, ref, {ref});
  CHECK(copy.score == doctest::Approx(oc.score).epsilon(1e-12));
  CHECK(match.score == doctest::Approx(om.score).epsilon(1e-12));
  CHECK(match.score == 1.0);
}

TEST_CASE("sari: partial deletion of a repeated n-gram") {
  // source has "x" twice, reference keeps one, candidate keeps one:
  // the single deletion is exactly what the reference did
  auto r = sari({"x", "x", "y"}, {"x", "y"}, {{"x", "y"}});
  CHECK(r.per_order[0].del_precision == 1.0);
}

TEST_CASE("sari: reference order does not matter") {
  testsupport::Gen g(5);
  for (int i = 0; i < 100; ++i) {
    Seq src = g.tokens(1, 8, 6), cand = g.tokens(0, 8, 6);
    std::vector<Seq> refs;
    for (std::size_t k = g.size(2, 4); k > 0; --k) refs.push_back(g.tokens(0, 8, 6));
    double a = sari(src, cand, refs).score;
    std::reverse(refs.begin(), refs.end());
    double b = sari(src, cand, refs).score;
    std::shuffle(refs.begin(), refs.end(), g.engine());
    double c = sari(src, cand, refs).score;
    CHECK(std::abs(a - b) <= 1e-12);
    CHECK(std::abs(a - c) <= 1e-12);
  }
}

TEST_CASE("metrics: every output within [0, 1]") {
  testsupport::Gen g(99);
  auto in_range = [](double x) { return x >= 0.0 && x <= 1.0; };
  for (int i = 0; i < 300; ++i) {
    Seq src = g.tokens(0, 10, 8), cand = g.tokens(0, 10, 8);
    std::vector<Seq> refs;
    for (std::size_t k = g.size(1, 3); k > 0; --k) refs.push_back(g.tokens(0, 10, 8));
    auto b = sentence_bleu(cand, refs, g.coin() ? Smoothing::kNone : Smoothing::kAddOneOnZero);
    CHECK(in_range(b.score));
    CHECK(in_range(b.brevity_penalty));
    for (auto r : {rouge_n(cand, refs, 1), rouge_n(cand, refs, 2), rouge_l(cand, refs)}) {
      CHECK(in_range(r.precision));
      CHECK(in_range(r.recall));
      CHECK(in_range(r.f1));
    }
    auto s = sari(src, cand, refs);
    CHECK(in_range(s.score));
    CHECK(in_range(s.f_add));
    CHECK(in_range(s.f_keep));
    CHECK(in_range(s.p_del));
  }
}

TEST_CASE("metrics: agree with brute-force oracle on random small cases") {
  testsupport::Gen g(20240901);
  const auto start = std::chrono::steady_clock::now();
  const int cases = 400;
  int mismatches = 0;
  for (int i = 0; i < cases; ++i) {
    std::size_t vocab = g.size(2, 8);
    Seq src = g.tokens(0, 10, vocab), cand = g.tokens(0, 10, vocab);
    std::vector<Seq> refs;
    for (std::size_t k = g.size(1, 3); k > 0; --k) refs.push_back(g.tokens(0, 10, vocab));
    bool smooth = g.coin();
    bool avg = g.coin();
    auto mode = avg ? MultiRef::kAverage : MultiRef::kBest;

    auto b = sentence_bleu(cand, refs, smooth ? Smoothing::kAddOneOnZero : Smoothing::kNone);
    auto ob = oracle::bleu(cand, refs, smooth);
    auto r1 = rouge_n(cand, refs, 1, mode), r2 = rouge_n(cand, refs, 2, mode);
    auto o1 = oracle::rouge_n(cand, refs, 1, avg), o2 = oracle::rouge_n(cand, refs, 2, avg);
    auto rl = rouge_l(cand, refs, mode);
    auto ol = oracle::rouge_l(cand, refs, avg);
    auto s = sari(src, cand, refs);
    auto os = oracle::sari(src, cand, refs);

    auto near = [](double x, double y) { return std::abs(x - y) <= 1e-9; };
    bool ok = near(b.score, ob.score) && near(b.brevity_penalty, ob.bp);
    for (int n = 0; n < 4; ++n) ok = ok && near(b.precisions[n], ob.p[n]);
    ok = ok && near(r1.precision, o1.p) && near(r1.recall, o1.r) && near(r1.f1, o1.f);
    ok = ok && near(r2.precision, o2.p) && near(r2.recall, o2.r) && near(r2.f1, o2.f);
    ok = ok && near(rl.precision, ol.p) && near(rl.recall, ol.r) && near(rl.f1, ol.f);
    ok = ok && near(s.score, os.score) && near(s.f_add, os.f_add) && near(s.f_keep, os.f_keep) &&
         near(s.p_del, os.p_del);
    if (!ok) ++mismatches;
    CHECK(ok);
  }
  CHECK(mismatches == 0);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 10.0);
}

TEST_CASE("corpus bleu agrees with the count-summing oracle") {
  testsupport::Gen g(77);
  for (int i = 0; i < 200; ++i) {
    std::vector<BleuPair> pairs;
    std::vector<std::pair<Seq, std::vector<Seq>>> opairs;
    for (std::size_t p = g.size(1, 4); p > 0; --p) {
      Seq c = g.tokens(0, 10, 6);
      std::vector<Seq> refs;
      for (std::size_t k = g.size(1, 3); k > 0; --k) refs.push_back(g.tokens(1, 10, 6));
      pairs.push_back({c, refs});
      opairs.push_back({c, refs});
    }
    bool smooth = g.coin();
    auto got = corpus_bleu(pairs, smooth ? Smoothing::kAddOneOnZero : Smoothing::kNone);
    auto want = oracle::corpus_bleu(opairs, smooth);
    CHECK(std::abs(got.score - want.score) <= 1e-12);
  }
}

TEST_CASE("smoothing and multi-ref names") {
  CHECK(parse_smoothing("none") == Smoothing::kNone);
  CHECK(parse_smoothing("add-one-on-zero") == Smoothing::kAddOneOnZero);
  CHECK(smoothing_name(Smoothing::kAddOneOnZero) == "add-one-on-zero");
  CHECK_THROWS_AS(parse_smoothing("exp"), ValidationError);
  CHECK(parse_multi_ref("average") == MultiRef::kAverage);
  CHECK_THROWS_AS(parse_multi_ref("worst"), ValidationError);
}

// ---------------------------------------------------------------------------
// evaluate_run

namespace {

corpus::Corpus three_sentence_corpus() {
  using namespace corpus;
  return Corpus({{"Q1", "Is it safe?", {}}},
                {{"P1", "Q1", {"The patient has hypertension.", "Dosage was titrated weekly.",
                               "No serious adverse events occurred."}}},
                {{"P1:A", "P1", "A",
                  {{"The patient has high blood pressure."},
                   {"The dose was changed every week."},
                   {"No serious side effects happened."}}},
                 {"P1:B", "P1", "B", {{"The patient has high blood pressure."}, {}, {"Nothing bad happened."}}}});
}

corpus::CorpusSplit all_test(const corpus::Corpus& c) {
  corpus::CorpusSplit s;
  for (const auto& a : c.abstracts()) s.test.push_back(a.id);
  return s;
}

PredictionRecord pred(const std::string& sys, const std::string& aid, std::size_t i, Seq out) {
  PredictionRecord p;
  p.system_id = sys;
  p.abstract_id = aid;
  p.sentence_index = i;
  p.output_sentences = std::move(out);
  p.prompt_hash = "h";
  return p;
}

}  // namespace

TEST_CASE("evaluate_run: matches the oracle per sentence") {
  auto c = three_sentence_corpus();
  auto split = all_test(c);
  std::vector<PredictionRecord> preds = {
      pred("s", "P1", 0, {"The patient has high blood pressure."}),
      pred("s", "P1", 1, {"Dose changed weekly."}),
      pred("s", "P1", 2, {"No serious side effects occurred."}),
  };
  auto report = evaluate_run(preds, c, split, corpus::Section::kTest);
  REQUIRE(report.per_sentence.size() == 3);
  CHECK(report.gaps.empty());
  double sari_sum = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& src = c.abstracts()[0].sentences[i];
    std::vector<Seq> refs;
    for (const auto* ad : c.adaptations_of("P1")) refs.push_back(toks(ad->target_text(i)));
    auto want = oracle::sari(toks(src), toks(preds[i].candidate_text()), refs);
    CHECK(std::abs(report.per_sentence[i].sari.score - want.score) <= 1e-9);
    sari_sum += want.score;
  }
  CHECK(std::abs(report.aggregates.sari - sari_sum / 3) <= 1e-9);
}

TEST_CASE("evaluate_run: identity predictions") {
  using namespace corpus;
  Corpus c({{"Q1", "q?", {}}}, {{"P1", "Q1", {"Alpha beta gamma delta.", "Epsilon zeta eta theta."}}},
           {{"P1:A", "P1", "A", {{"Alpha gamma delta is simple."}, {"Zeta eta theta is plain."}}}});
  auto split = all_test(c);
  std::vector<PredictionRecord> refs_pred, src_pred;
  for (std::size_t i = 0; i < 2; ++i) {
    refs_pred.push_back(pred("ref", "P1", i, {c.adaptations()[0].target_text(i)}));
    src_pred.push_back(pred("src", "P1", i, {c.abstracts()[0].sentences[i]}));
  }
  auto a = evaluate_run(refs_pred, c, split, Section::kTest);
  auto b = evaluate_run(src_pred, c, split, Section::kTest);
  CHECK(a.aggregates.sari == 1.0);
  CHECK(a.aggregates.corpus_bleu.score == 1.0);
  CHECK(b.aggregates.sari < a.aggregates.sari);
}

TEST_CASE("evaluate_run: gaps, errors and rejected inputs") {
  auto c = three_sentence_corpus();
  auto split = all_test(c);
  auto p0 = pred("s", "P1", 0, {"x"});
  auto p2 = pred("s", "P1", 2, {});
  p2.error = "backend timeout";
  auto report = evaluate_run({p0, p2}, c, split, corpus::Section::kTest);
  CHECK(report.per_sentence.size() == 1);
  REQUIRE(report.gaps.size() == 2);
  CHECK(report.gaps[0].sentence_index == 1);
  CHECK(report.gaps[0].reason == "missing");
  CHECK(report.gaps[1].reason == "backend timeout");
  CHECK(report.n_expected == 3);

  CHECK_THROWS_AS(evaluate_run({p0, pred("t", "P1", 1, {"y"})}, c, split, corpus::Section::kTest),
                  ValidationError);
  CHECK_THROWS_AS(evaluate_run({p0, p0}, c, split, corpus::Section::kTest), ValidationError);
  CHECK_THROWS_AS(evaluate_run({pred("s", "P9", 0, {"x"})}, c, split, corpus::Section::kTest),
                  ValidationError);
  CHECK_THROWS_AS(evaluate_run({pred("s", "P1", 7, {"x"})}, c, split, corpus::Section::kTest),
                  ValidationError);
  CHECK_THROWS_AS(evaluate_run({p0}, c, split, corpus::Section::kTrain), ValidationError);
  CHECK_THROWS_AS(evaluate_run({p2}, c, split, corpus::Section::kTest), ValidationError);
}

TEST_CASE("evaluate_run: parallel scoring is identical to serial") {
  testsupport::Gen g(3);
  auto c = g.corpus(2, 4, 6, 3);
  corpus::CorpusSplit split;
  for (const auto& a : c.abstracts()) split.test.push_back(a.id);
  std::vector<PredictionRecord> preds;
  for (const auto& a : c.abstracts()) {
    for (std::size_t i = 0; i < a.sentences.size(); ++i) {
      preds.push_back(pred("s", a.id, i, {"Plain " + std::to_string(i % 2) + "."}));
    }
  }
  ScoringConfig serial, parallel;
  parallel.threads = 4;
  auto a = evaluate_run(preds, c, split, corpus::Section::kTest, serial);
  auto b = evaluate_run(preds, c, split, corpus::Section::kTest, parallel);
  CHECK(report_json_text(a) == report_json_text(b));
}

TEST_CASE("report json round trip and aggregate recomputation") {
  auto c = three_sentence_corpus();
  auto split = all_test(c);
  std::vector<PredictionRecord> preds = {pred("s", "P1", 0, {"The patient has high pressure."}),
                                         pred("s", "P1", 1, {"Dose changed."}),
                                         pred("s", "P1", 2, {"Nothing serious."})};
  ScoringConfig cfg;
  cfg.corpus_smoothing = Smoothing::kAddOneOnZero;
  auto report = evaluate_run(preds, c, split, corpus::Section::kTest, cfg);
  auto text = report_json_text(report);
  auto back = report_from_json(nlohmann::json::parse(text));
  CHECK(report_json_text(back) == text);
  auto again = aggregate(back.per_sentence, back.corpus_smoothing);
  CHECK(std::abs(again.sari - report.aggregates.sari) <= 1e-12);
  CHECK(std::abs(again.rouge1_f - report.aggregates.rouge1_f) <= 1e-12);
  CHECK(std::abs(again.corpus_bleu.score - report.aggregates.corpus_bleu.score) <= 1e-12);
}

TEST_CASE("report table columns") {
  MetricsReport r;
  r.system_id = "sys";
  r.aggregates.sari = 0.4321;
  r.aggregates.corpus_bleu.score = 0.1;
  auto table = format_report_table({r});
  CHECK(table.find("system") != std::string::npos);
  CHECK(table.find("SARI") != std::string::npos);
  CHECK(table.find("ROUGE-L F") != std::string::npos);
  CHECK(table.find("43.21") != std::string::npos);
  CHECK(table.find("10.00") != std::string::npos);
}
