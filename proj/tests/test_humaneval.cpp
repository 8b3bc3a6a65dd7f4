#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "plaba/error.hpp"
#include "plaba/humaneval.hpp"
#include "plaba/util.hpp"
#include "support.hpp"

using namespace plaba;
using namespace plaba::humaneval;
using json = nlohmann::json;

namespace {

Judgment jd(const std::string& sys, const std::string& abs, std::size_t k, Axis axis, int raw) {
  static int counter = 0;
  return {"j" + std::to_string(counter++), "ann", sys, abs, k, axis, raw, ""};
}

// Independent recomputation: per-axis mean of raws mapped linearly, then the
// plain mean over the axes of each group that have any judgments.
std::map<std::string, std::map<std::string, double>> brute_groups(const std::vector<Judgment>& js) {
  std::map<std::string, std::map<Axis, std::vector<int>>> raws;
  for (const auto& j : js) raws[j.system_id][j.axis].push_back(j.raw);
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [sys, axes] : raws) {
    std::map<std::string, std::vector<double>> per_group;
    for (const auto& [axis, v] : axes) {
      double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double scaled = 1.0 + (mean + 1.0) / 2.0 * 99.0;
      per_group[group_name(group_of(axis))].push_back(scaled);
    }
    for (const auto& [g, v] : per_group) {
      out[sys][g] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
  }
  return out;
}

PreferenceRanking rk(const std::string& abs, std::vector<std::string> order) {
  return {"R1", abs, std::move(order)};
}

corpus::Corpus questions_with_abstracts(std::size_t nq, std::size_t na) {
  std::vector<corpus::ConsumerQuestion> qs;
  std::vector<corpus::SourceAbstract> as;
  for (std::size_t q = 0; q < nq; ++q) {
    std::string qid = "Q" + std::to_string(100 + q);
    qs.push_back({qid, "question?", {}});
    for (std::size_t a = 0; a < na; ++a) {
      as.push_back({std::to_string(5000000 + q * 100 + a), qid, {"One.", "Two.", "Three."}});
    }
  }
  return corpus::Corpus(std::move(qs), std::move(as), {});
}

}  // namespace

TEST_CASE("transform: endpoints, midpoint, symmetry") {
  CHECK(transform_score(-1.0) == 1.0);
  CHECK(transform_score(0.0) == 50.5);
  CHECK(transform_score(1.0) == 100.0);
  for (double x = -1.0; x <= 1.0; x += 0.0625) {
    CHECK(transform_score(x) + transform_score(-x) == doctest::Approx(101.0).epsilon(1e-12));
    CHECK(transform_score(x) >= 1.0);
    CHECK(transform_score(x) <= 100.0);
  }
  CHECK_THROWS_AS(transform_score(1.01), ValidationError);
  CHECK_THROWS_AS(transform_score(-2.0), ValidationError);
  CHECK_THROWS_AS(transform_score(std::nan("")), ValidationError);
}

TEST_CASE("aggregate: all +1 gives 100, mixed gives 50.5") {
  std::vector<Judgment> js;
  for (std::size_t k = 0; k < 5; ++k) js.push_back(jd("s", "A", k, Axis::kFluency, 1));
  auto r = aggregate_axes(js);
  REQUIRE(r.find("s"));
  CHECK(r.find("s")->axes.at(Axis::kFluency).scaled == 100.0);
  CHECK(r.find("s")->groups.at(AxisGroup::kSimplicity) == 100.0);
  CHECK(!r.find("s")->groups.contains(AxisGroup::kAccuracy));

  std::vector<Judgment> mixed = {jd("t", "A", 0, Axis::kFaithfulness, -1), jd("t", "A", 1, Axis::kFaithfulness, 0),
                                 jd("t", "A", 2, Axis::kFaithfulness, 1)};
  auto m = aggregate_axes(mixed);
  CHECK(m.find("t")->axes.at(Axis::kFaithfulness).scaled == 50.5);
  CHECK(m.find("t")->axes.at(Axis::kFaithfulness).n_judgments == 3);
  CHECK(m.find("t")->axes.at(Axis::kFaithfulness).n_sentences == 3);
  CHECK(m.find("nope") == nullptr);
}

TEST_CASE("aggregate: group mean is over axes, not judgments") {
  // 3 judgments at +1 on one axis, 1 at -1 on another: (100 + 1) / 2
  std::vector<Judgment> js = {jd("s", "A", 0, Axis::kFluency, 1), jd("s", "A", 1, Axis::kFluency, 1),
                              jd("s", "A", 2, Axis::kFluency, 1), jd("s", "A", 0, Axis::kTermAccuracy, -1)};
  CHECK(aggregate_axes(js).find("s")->groups.at(AxisGroup::kSimplicity) == 50.5);
}

TEST_CASE("aggregate: matches brute-force recomputation, invariant under permutation") {
  testsupport::Gen g(5);
  for (int round = 0; round < 100; ++round) {
    std::vector<Judgment> js;
    for (std::size_t i = g.size(1, 60); i > 0; --i) {
      js.push_back(jd("sys" + std::to_string(g.size(0, 3)), "A" + std::to_string(g.size(0, 4)), g.size(0, 5),
                      kAllAxes[g.size(0, 5)], static_cast<int>(g.size(0, 2)) - 1));
    }
    auto r = aggregate_axes(js);
    auto want = brute_groups(js);
    CHECK(r.systems.size() == want.size());
    for (const auto& s : r.systems) {
      for (const auto& [group, v] : s.groups) {
        CHECK(std::abs(v - want[s.system_id][group_name(group)]) < 1e-12);
      }
    }
    auto shuffled = js;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    auto r2 = aggregate_axes(shuffled);
    CHECK(human_report_to_json({r2, {}}) == human_report_to_json({r, {}}));
  }
}

TEST_CASE("aggregate: more neutral judgments pull the score toward 50.5") {
  std::vector<Judgment> js = {jd("s", "A", 0, Axis::kFluency, 1)};
  double prev = aggregate_axes(js).find("s")->axes.at(Axis::kFluency).scaled;
  for (std::size_t k = 1; k < 20; ++k) {
    js.push_back(jd("s", "A", k, Axis::kFluency, 0));
    double now = aggregate_axes(js).find("s")->axes.at(Axis::kFluency).scaled;
    CHECK(now < prev);
    CHECK(now > 50.5);
    prev = now;
  }
}

TEST_CASE("aggregate: coverage counts distinct sentences per group") {
  std::vector<Judgment> js;
  // 430 sentences judged on every simplicity axis, 117 of them on accuracy too
  for (std::size_t i = 0; i < 430; ++i) {
    std::string abs = "A" + std::to_string(i / 10);
    for (Axis a : kSimplicityAxes) js.push_back(jd("s", abs, i % 10, a, 0));
    if (i < 117) {
      for (Axis a : kAccuracyAxes) js.push_back(jd("s", abs, i % 10, a, 1));
    }
  }
  auto r = aggregate_axes(js);
  const auto* s = r.find("s");
  REQUIRE(s);
  CHECK(s->coverage.at(AxisGroup::kSimplicity) == 430);
  CHECK(s->coverage.at(AxisGroup::kAccuracy) == 117);
  CHECK(s->axes.at(Axis::kFluency).n_judgments == 430);
  CHECK(s->axes.at(Axis::kCompleteness).n_sentences == 117);
  CHECK(s->groups.at(AxisGroup::kAccuracy) == 100.0);
}

TEST_CASE("aggregate: invalid raw rejected") {
  auto bad = jd("s", "A", 0, Axis::kFluency, 2);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(aggregate_axes({bad}), ValidationError);
  auto noid = jd("s", "A", 0, Axis::kFluency, 0);
  noid.id = "";
  CHECK_THROWS_AS(noid.validate(), ValidationError);
}

TEST_CASE("preferences: fixture with nine first places") {
  auto rankings = load_rankings(testsupport::fixture("rankings_10.jsonl"));
  REQUIRE(rankings.size() == 10);
  auto t = tally_preferences(rankings);
  REQUIRE(t.size() == 3);
  CHECK(t[0].system_id == "sysA");
  CHECK(t[0].first_preferences == 9);
  CHECK(t[0].overall_rank == 1);
  CHECK(t[1].system_id == "sysB");
  CHECK(t[1].first_preferences == 1);
  std::size_t firsts = 0;
  for (const auto& p : t) firsts += p.first_preferences;
  CHECK(firsts == 10);
}

TEST_CASE("preferences: single ranking and ties") {
  auto one = tally_preferences({rk("A", {"b", "a", "c"})});
  CHECK(one[0].system_id == "b");
  CHECK(one[1].system_id == "a");
  CHECK(one[2].system_id == "c");
  CHECK(one[2].mean_rank == 3.0);

  // 5/5 first places; x is second every other time, y is last
  std::vector<PreferenceRanking> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(rk("A" + std::to_string(i), {"x", "z", "y"}));
  for (int i = 0; i < 5; ++i) rs.push_back(rk("B" + std::to_string(i), {"y", "x", "z"}));
  auto t = tally_preferences(rs);
  CHECK(t[0].first_preferences == 5);
  CHECK(t[1].first_preferences == 5);
  CHECK(t[0].system_id == "x");  // mean rank 1.5 vs 2.0
  CHECK(t[0].mean_rank == 1.5);
  CHECK(t[1].system_id == "y");
  CHECK(t[2].system_id == "z");

  // full tie falls back to id
  auto sym = tally_preferences({rk("A", {"q", "p"}), rk("B", {"p", "q"})});
  CHECK(sym[0].system_id == "p");
  CHECK(tally_preferences({}).empty());
}

TEST_CASE("preferences: rankings over different system sets are rejected") {
  CHECK_THROWS_AS(tally_preferences({rk("A", {"a", "b"}), rk("B", {"a", "c"})}), ValidationError);
  CHECK_THROWS_AS(tally_preferences({rk("A", {"a", "a"})}), ValidationError);
}

TEST_CASE("preferences: order of input does not matter") {
  testsupport::Gen g(9);
  std::vector<std::string> systems = {"s1", "s2", "s3", "s4"};
  for (int round = 0; round < 50; ++round) {
    std::vector<PreferenceRanking> rs;
    for (std::size_t i = g.size(1, 12); i > 0; --i) {
      auto order = systems;
      std::shuffle(order.begin(), order.end(), g.engine());
      rs.push_back(rk("A" + std::to_string(i), order));
    }
    auto a = tally_preferences(rs);
    std::shuffle(rs.begin(), rs.end(), g.engine());
    auto b = tally_preferences(rs);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].system_id == b[i].system_id);
      CHECK(a[i].rank_sum == b[i].rank_sum);
    }
    // brute force: the winner has the most first places
    std::map<std::string, std::size_t> firsts;
    for (const auto& r : rs) ++firsts[r.ordered_systems[0]];
    std::size_t best = 0;
    for (const auto& [_, n] : firsts) best = std::max(best, n);
    CHECK(a[0].first_preferences == best);
  }
}

TEST_CASE("sampling: external preset picks one abstract for each of 40 questions") {
  auto c = questions_with_abstracts(45, 10);
  auto s = sample_for_evaluation(c, {}, 11);
  CHECK(s.size() == 40);
  std::set<std::string> qs;
  for (const auto& e : s) {
    qs.insert(e.question_id);
    CHECK(c.find_abstract(e.abstract_id)->question_id == e.question_id);
    CHECK(e.simplicity_sentences == std::vector<std::size_t>{0, 1, 2});
    CHECK(e.accuracy_sentences.empty());
  }
  CHECK(qs.size() == 40);
  CHECK(sample_for_evaluation(c, {}, 11) == s);
  CHECK(sample_for_evaluation(c, {}, 12) != s);
  CHECK(samples_from_json(samples_to_json(s, 11)) == s);
}

TEST_CASE("sampling: internal preset and explicit lists") {
  auto c = questions_with_abstracts(8, 4);
  auto s = sample_for_evaluation(c, {}, 3, internal_preset());
  CHECK(s.size() == 10);
  std::map<std::string, int> per_q;
  for (const auto& e : s) ++per_q[e.question_id];
  CHECK(per_q.size() == 5);
  for (const auto& [_, n] : per_q) CHECK(n == 2);

  auto listed = sample_for_evaluation(c, {"Q101", "Q103"}, 3, parse_preset("all"));
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].question_id == "Q101");
  CHECK(listed[1].question_id == "Q103");

  CHECK_THROWS_AS(sample_for_evaluation(c, {}, 3, external_preset()), ValidationError);
  CHECK_THROWS_AS(sample_for_evaluation(c, {"Q999"}, 3, parse_preset("all")), ValidationError);
  CHECK_THROWS_AS(parse_preset("everything"), ValidationError);
}

TEST_CASE("sampling: every abstract is reachable") {
  auto c = questions_with_abstracts(1, 4);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    seen.insert(sample_for_evaluation(c, {}, seed, parse_preset("all"))[0].abstract_id);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("records: json round trips and validation") {
  auto j = jd("s", "A", 2, Axis::kTermSimplicity, -1);
  j.timestamp = "2026-01-01T00:00:00Z";
  CHECK(judgment_from_json(judgment_to_json(j)) == j);
  PreferenceRanking r{"R", "A", {"a", "b"}};
  CHECK(ranking_from_json(ranking_to_json(r)) == r);
  AccuracySelection sel{"R", "A", {0, 2}};
  CHECK(selection_from_json(selection_to_json(sel)) == sel);
  AccuracySelection too_many{"R", "A", {0, 1, 2, 3}};
  CHECK_THROWS_AS(too_many.validate(), ValidationError);
  auto doc = judgment_to_json(j);
  doc["axis"] = "beauty";
  CHECK_THROWS_AS(judgment_from_json(doc), ValidationError);
  for (Axis a : kAllAxes) {
    CHECK(parse_axis(axis_name(a)) == a);
    CHECK(!axis_help(a).empty());
  }
}

TEST_CASE("table: rows, top and median") {
  std::vector<Judgment> js = {jd("a", "A", 0, Axis::kFluency, 1), jd("b", "A", 0, Axis::kFluency, -1),
                              jd("c", "A", 0, Axis::kFluency, 0)};
  HumanReport rep{aggregate_axes(js), tally_preferences({rk("A", {"a", "c", "b"})})};
  auto t = format_human_table(rep);
  auto lines = std::count(t.begin(), t.end(), '\n');
  CHECK(lines == 6);  // header, 3 systems, top, median
  CHECK(t.find("top") != std::string::npos);
  CHECK(t.find("median") != std::string::npos);
  CHECK(t.find("100.00") != std::string::npos);
  CHECK(t.find("50.50") != std::string::npos);
}
