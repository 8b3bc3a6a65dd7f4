#include "plaba/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "plaba/error.hpp"
#include "plaba/textproc.hpp"
#include "plaba/util.hpp"

namespace plaba::corpus {

using nlohmann::json;

std::string Adaptation::target_text(std::size_t sentence_index) const {
  std::string out;
  for (const auto& s : alignment.at(sentence_index)) {
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

Corpus::Corpus(std::vector<ConsumerQuestion> questions, std::vector<SourceAbstract> abstracts,
               std::vector<Adaptation> adaptations)
    : questions_(std::move(questions)),
      abstracts_(std::move(abstracts)),
      adaptations_(std::move(adaptations)) {
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& q = questions_[i];
    if (q.id.empty()) throw ValidationError("question with empty id");
    if (q.text.empty()) throw ValidationError("question " + q.id + ": empty text");
    if (!question_index_.emplace(q.id, i).second) {
      throw ValidationError("duplicate question id " + q.id);
    }
  }
  for (std::size_t i = 0; i < abstracts_.size(); ++i) {
    const auto& a = abstracts_[i];
    if (a.id.empty()) throw ValidationError("abstract with empty id");
    if (!question_index_.contains(a.question_id)) {
      throw ValidationError("abstract " + a.id + ": dangling question reference " + a.question_id);
    }
    if (a.sentences.empty()) throw ValidationError("abstract " + a.id + ": no sentences");
    for (std::size_t k = 0; k < a.sentences.size(); ++k) {
      if (a.sentences[k].empty()) {
        throw ValidationError("abstract " + a.id + ": sentence " + std::to_string(k) + " is empty");
      }
    }
    if (!abstract_index_.emplace(a.id, i).second) {
      throw ValidationError("duplicate abstract id " + a.id);
    }
  }
  std::set<std::string> adaptation_ids;
  for (std::size_t i = 0; i < adaptations_.size(); ++i) {
    const auto& ad = adaptations_[i];
    if (ad.id.empty()) throw ValidationError("adaptation with empty id");
    if (!adaptation_ids.insert(ad.id).second) {
      throw ValidationError("duplicate adaptation id " + ad.id);
    }
    auto it = abstract_index_.find(ad.abstract_id);
    if (it == abstract_index_.end()) {
      throw ValidationError("adaptation " + ad.id + ": dangling abstract reference " +
                            ad.abstract_id);
    }
    const auto& a = abstracts_[it->second];
    if (ad.alignment.size() != a.sentences.size()) {
      throw ValidationError("adaptation " + ad.id + " of abstract " + a.id +
                            ": alignment length mismatch (expected " +
                            std::to_string(a.sentences.size()) + ", got " +
                            std::to_string(ad.alignment.size()) + ")");
    }
    for (std::size_t k = 0; k < ad.alignment.size(); ++k) {
      for (const auto& s : ad.alignment[k]) {
        if (s.empty()) {
          throw ValidationError("adaptation " + ad.id + ": empty adapted sentence at index " +
                                std::to_string(k));
        }
      }
    }
    adaptations_by_abstract_[ad.abstract_id].push_back(i);
  }
  for (auto& [_, idx] : adaptations_by_abstract_) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return adaptations_[x].id < adaptations_[y].id;
    });
  }
}

const ConsumerQuestion* Corpus::find_question(const std::string& id) const {
  auto it = question_index_.find(id);
  return it == question_index_.end() ? nullptr : &questions_[it->second];
}

const SourceAbstract* Corpus::find_abstract(const std::string& id) const {
  auto it = abstract_index_.find(id);
  return it == abstract_index_.end() ? nullptr : &abstracts_[it->second];
}

const ConsumerQuestion& Corpus::question_of(const SourceAbstract& abstract) const {
  return questions_[question_index_.at(abstract.question_id)];
}

std::vector<const Adaptation*> Corpus::adaptations_of(const std::string& abstract_id) const {
  std::vector<const Adaptation*> out;
  auto it = adaptations_by_abstract_.find(abstract_id);
  if (it == adaptations_by_abstract_.end()) return out;
  for (std::size_t i : it->second) out.push_back(&adaptations_[i]);
  return out;
}

std::vector<std::string> Corpus::abstracts_of(const std::string& question_id) const {
  std::vector<std::string> out;
  for (const auto& a : abstracts_) {
    if (a.question_id == question_id) out.push_back(a.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_field(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object()) throw ValidationError(context + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(context + ": missing field \"" + key + "\"");
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(context + ": bad field \"" + key + "\": " + e.what());
  }
}

const json& get_array(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw ValidationError(std::string("corpus: missing array \"") + key + "\"");
  }
  return *it;
}

}  // namespace

Corpus corpus_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("corpus: top-level value must be an object");
  std::vector<ConsumerQuestion> questions;
  std::vector<SourceAbstract> abstracts;
  std::vector<Adaptation> adaptations;
  std::size_t i = 0;
  for (const auto& q : get_array(doc, "questions")) {
    std::string ctx = "questions[" + std::to_string(i++) + "]";
    ConsumerQuestion out;
    out.id = get_field<std::string>(q, "id", ctx);
    out.text = get_field<std::string>(q, "text", ctx);
    if (q.contains("focus_terms")) {
      out.focus_terms = get_field<std::vector<std::string>>(q, "focus_terms", ctx);
    }
    questions.push_back(std::move(out));
  }
  i = 0;
  for (const auto& a : get_array(doc, "abstracts")) {
    std::string ctx = "abstracts[" + std::to_string(i++) + "]";
    abstracts.push_back({get_field<std::string>(a, "id", ctx),
                         get_field<std::string>(a, "question_id", ctx),
                         get_field<std::vector<std::string>>(a, "sentences", ctx)});
  }
  i = 0;
  for (const auto& ad : get_array(doc, "adaptations")) {
    std::string ctx = "adaptations[" + std::to_string(i++) + "]";
    adaptations.push_back({get_field<std::string>(ad, "id", ctx),
                           get_field<std::string>(ad, "abstract_id", ctx),
                           get_field<std::string>(ad, "annotator_id", ctx),
                           get_field<std::vector<std::vector<std::string>>>(ad, "alignment", ctx)});
  }
  return Corpus(std::move(questions), std::move(abstracts), std::move(adaptations));
}

json corpus_to_json(const Corpus& corpus) {
  json questions = json::array();
  for (const auto& q : corpus.questions()) {
    questions.push_back({{"id", q.id}, {"text", q.text}, {"focus_terms", q.focus_terms}});
  }
  json abstracts = json::array();
  for (const auto& a : corpus.abstracts()) {
    abstracts.push_back({{"id", a.id}, {"question_id", a.question_id}, {"sentences", a.sentences}});
  }
  json adaptations = json::array();
  for (const auto& ad : corpus.adaptations()) {
    adaptations.push_back({{"id", ad.id},
                           {"abstract_id", ad.abstract_id},
                           {"annotator_id", ad.annotator_id},
                           {"alignment", ad.alignment}});
  }
  return {{"questions", questions}, {"abstracts", abstracts}, {"adaptations", adaptations}};
}

namespace {

json parse_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  return corpus_from_json(parse_json_file(path));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, corpus_to_json(corpus).dump(2) + "\n");
}

DropPolicy parse_drop_policy(const std::string& name) {
  if (name == "keep-empty") return DropPolicy::kKeepEmpty;
  if (name == "exclude-dropped") return DropPolicy::kExcludeDropped;
  throw ValidationError("unknown drop policy: " + name);
}

std::vector<SentencePair> build_sentence_pairs(const Corpus& corpus, DropPolicy policy) {
  std::vector<const Adaptation*> order;
  for (const auto& ad : corpus.adaptations()) order.push_back(&ad);
  auto key = [&](const Adaptation* ad) {
    const auto* a = corpus.find_abstract(ad->abstract_id);
    return std::tie(a->question_id, ad->abstract_id, ad->id);
  };
  std::sort(order.begin(), order.end(),
            [&](const Adaptation* x, const Adaptation* y) { return key(x) < key(y); });

  std::vector<SentencePair> pairs;
  for (const Adaptation* ad : order) {
    const auto* a = corpus.find_abstract(ad->abstract_id);
    for (std::size_t k = 0; k < a->sentences.size(); ++k) {
      if (policy == DropPolicy::kExcludeDropped && ad->alignment[k].empty()) continue;
      pairs.push_back({a->question_id, a->id, ad->id, k, a->sentences[k], ad->target_text(k)});
    }
  }
  return pairs;
}

json pair_to_json(const SentencePair& pair) {
  return {{"question_id", pair.question_id},     {"abstract_id", pair.abstract_id},
          {"adaptation_id", pair.adaptation_id}, {"sentence_index", pair.sentence_index},
          {"source_text", pair.source_text},     {"target_text", pair.target_text}};
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.n_questions = corpus.questions().size();
  stats.n_abstracts = corpus.abstracts().size();
  stats.n_adaptations = corpus.adaptations().size();
  for (const auto& a : corpus.abstracts()) {
    std::size_t k = corpus.adaptations_of(a.id).size();
    if (k >= 2) ++stats.n_multi_adapted;
    stats.n_pairs += a.sentences.size() * k;
  }
  return stats;
}

json stats_to_json(const CorpusStats& stats) {
  return {{"n_questions", stats.n_questions},
          {"n_abstracts", stats.n_abstracts},
          {"n_adaptations", stats.n_adaptations},
          {"n_multi_adapted", stats.n_multi_adapted},
          {"n_pairs", stats.n_pairs}};
}

// ---------------------------------------------------------------------------

Section parse_section(const std::string& name) {
  if (name == "train") return Section::kTrain;
  if (name == "validation") return Section::kValidation;
  if (name == "test") return Section::kTest;
  throw ValidationError("unknown split section: " + name + " (expected train|validation|test)");
}

std::string section_name(Section section) {
  switch (section) {
    case Section::kTrain: return "train";
    case Section::kValidation: return "validation";
    case Section::kTest: return "test";
  }
  return "?";
}

const std::vector<std::string>& CorpusSplit::section(Section s) const {
  switch (s) {
    case Section::kTrain: return train;
    case Section::kValidation: return validation;
    case Section::kTest: return test;
  }
  return test;
}

namespace {

void check_ratios(const std::array<double, 3>& ratios) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ValidationError("split ratios must be non-negative");
  }
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "split ratios must sum to 1 (got " << sum << ")";
    throw ValidationError(msg.str());
  }
}

// floor() that tolerates representation error in products like 0.7 * 20.
std::size_t floor_cut(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

}  // namespace

std::pair<std::size_t, std::size_t> split_boundaries(std::size_t n,
                                                     const std::array<double, 3>& ratios) {
  check_ratios(ratios);
  const double dn = static_cast<double>(n);
  std::size_t first = std::min(n, floor_cut(ratios[0] * dn));
  std::size_t second = std::min(n, std::max(first, floor_cut((ratios[0] + ratios[1]) * dn)));
  return {first, second};
}

CorpusSplit split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
  auto [first, second] = split_boundaries(corpus.abstracts().size(), ratios);
  std::vector<std::string> ids;
  for (const auto& a : corpus.abstracts()) ids.push_back(a.id);
  std::sort(ids.begin(), ids.end());
  SeededRng rng(seed);
  rng.shuffle(ids);

  CorpusSplit split;
  split.seed = seed;
  split.ratios = ratios;
  auto begin = ids.begin();
  split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(first));
  split.validation.assign(begin + static_cast<std::ptrdiff_t>(first),
                          begin + static_cast<std::ptrdiff_t>(second));
  split.test.assign(begin + static_cast<std::ptrdiff_t>(second), ids.end());
  return split;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> out{};
  std::istringstream in(text);
  std::string piece;
  std::size_t i = 0;
  while (std::getline(in, piece, ',')) {
    if (i >= 3) throw ValidationError("expected three comma-separated ratios: " + text);
    try {
      std::size_t used = 0;
      out[i] = std::stod(piece, &used);
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ValidationError("bad ratio \"" + piece + "\"");
    }
    ++i;
  }
  if (i != 3) throw ValidationError("expected three comma-separated ratios: " + text);
  check_ratios(out);
  return out;
}

json split_to_json(const CorpusSplit& split) {
  return {{"seed", split.seed},
          {"ratios", split.ratios},
          {"train", split.train},
          {"validation", split.validation},
          {"test", split.test}};
}

CorpusSplit split_from_json(const json& doc) {
  CorpusSplit split;
  split.seed = get_field<std::uint64_t>(doc, "seed", "split");
  split.ratios = get_field<std::array<double, 3>>(doc, "ratios", "split");
  split.train = get_field<std::vector<std::string>>(doc, "train", "split");
  split.validation = get_field<std::vector<std::string>>(doc, "validation", "split");
  split.test = get_field<std::vector<std::string>>(doc, "test", "split");
  check_ratios(split.ratios);
  return split;
}

CorpusSplit load_split(const std::filesystem::path& path) {
  return split_from_json(parse_json_file(path));
}

void validate_split(const CorpusSplit& split, const Corpus& corpus) {
  std::set<std::string> seen;
  for (const auto* section : {&split.train, &split.validation, &split.test}) {
    for (const auto& id : *section) {
      if (!corpus.find_abstract(id)) throw ValidationError("split names unknown abstract " + id);
      if (!seen.insert(id).second) throw ValidationError("split lists abstract " + id + " twice");
    }
  }
  if (seen.size() != corpus.abstracts().size()) {
    throw ValidationError("split does not cover every abstract (" + std::to_string(seen.size()) +
                          " of " + std::to_string(corpus.abstracts().size()) + ")");
  }
}

// ---------------------------------------------------------------------------

namespace {

// Orders "1","2",...,"10" numerically; non-numeric keys sort after, by text.
std::vector<std::string> numbered_keys(const json& obj) {
  std::vector<std::string> keys;
  for (auto it = obj.begin(); it != obj.end(); ++it) keys.push_back(it.key());
  auto numeric = [](const std::string& k) {
    return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  std::stable_sort(keys.begin(), keys.end(), [&](const std::string& a, const std::string& b) {
    bool na = numeric(a), nb = numeric(b);
    if (na != nb) return na;
    if (na && a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return keys;
}

std::vector<std::string> cell_sentences(const json& cell, const std::set<std::string>& abbreviations) {
  if (cell.is_null()) return {};
  if (cell.is_array()) {
    std::vector<std::string> out;
    for (const auto& s : cell) {
      std::string t = textproc::collapse_whitespace(s.get<std::string>());
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  }
  if (!cell.is_string()) throw ValidationError("adapted cell must be a string or list");
  return textproc::split_sentences(cell.get<std::string>(), abbreviations);
}

}  // namespace

Corpus import_plaba(const json& doc, const std::set<std::string>& abbreviations) {
  if (!doc.is_object()) throw ValidationError("PLABA layout: top-level value must be an object");
  std::vector<ConsumerQuestion> questions;
  std::vector<SourceAbstract> abstracts;
  std::vector<Adaptation> adaptations;
  try {
    for (const auto& qid : numbered_keys(doc)) {
      const json& q = doc.at(qid);
      ConsumerQuestion question{qid, get_field<std::string>(q, "question", "question " + qid), {}};
      if (q.contains("focus")) {
        const json& focus = q.at("focus");
        if (focus.is_string()) {
          question.focus_terms.push_back(focus.get<std::string>());
        } else {
          question.focus_terms = focus.get<std::vector<std::string>>();
        }
      }
      questions.push_back(std::move(question));

      const json& abs = q.at("abstracts");
      for (const auto& pmid : numbered_keys(abs)) {
        const json& entry = abs.at(pmid);
        const json& body = entry.at("abstract");
        SourceAbstract abstract{pmid, qid, {}};
        std::vector<std::string> sentence_keys;
        if (body.is_string()) {
          abstract.sentences = textproc::split_sentences(body.get<std::string>(), abbreviations);
        } else {
          sentence_keys = numbered_keys(body);
          for (const auto& k : sentence_keys) {
            abstract.sentences.push_back(textproc::collapse_whitespace(body.at(k).get<std::string>()));
          }
        }

        if (entry.contains("adaptations")) {
          const json& ads = entry.at("adaptations");
          for (const auto& annotator : numbered_keys(ads)) {
            const json& cells = ads.at(annotator);
            Adaptation ad{pmid + ":" + annotator, pmid, annotator, {}};
            if (cells.is_array()) {
              for (const auto& cell : cells) ad.alignment.push_back(cell_sentences(cell, abbreviations));
            } else if (!sentence_keys.empty()) {
              for (const auto& k : sentence_keys) {
                ad.alignment.push_back(cells.contains(k) ? cell_sentences(cells.at(k), abbreviations)
                                                         : std::vector<std::string>{});
              }
            } else {
              for (const auto& k : numbered_keys(cells)) {
                ad.alignment.push_back(cell_sentences(cells.at(k), abbreviations));
              }
            }
            adaptations.push_back(std::move(ad));
          }
        }
        abstracts.push_back(std::move(abstract));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("PLABA layout: ") + e.what());
  }
  return Corpus(std::move(questions), std::move(abstracts), std::move(adaptations));
}

Corpus import_plaba_file(const std::filesystem::path& path,
                         const std::set<std::string>& abbreviations) {
  return import_plaba(parse_json_file(path), abbreviations);
}

}  // namespace plaba::corpus
