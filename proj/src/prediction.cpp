#include "plaba/prediction.hpp"

#include <set>
#include <tuple>

#include "plaba/error.hpp"
#include "plaba/util.hpp"

namespace plaba {

using nlohmann::json;

std::string PredictionRecord::candidate_text() const {
  std::string out;
  for (const auto& s : output_sentences) {
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

json prediction_to_json(const PredictionRecord& record) {
  json out = {{"system_id", record.system_id},
              {"abstract_id", record.abstract_id},
              {"sentence_index", record.sentence_index},
              {"output_sentences", record.output_sentences},
              {"prompt_hash", record.prompt_hash},
              {"model_params", record.model_params}};
  if (record.error) out["error"] = *record.error;
  return out;
}

PredictionRecord prediction_from_json(const json& doc) {
  try {
    PredictionRecord r;
    r.system_id = doc.at("system_id").get<std::string>();
    r.abstract_id = doc.at("abstract_id").get<std::string>();
    r.sentence_index = doc.at("sentence_index").get<std::size_t>();
    r.output_sentences = doc.at("output_sentences").get<std::vector<std::string>>();
    r.prompt_hash = doc.value("prompt_hash", "");
    r.model_params = doc.value("model_params", json::object());
    if (doc.contains("error") && !doc.at("error").is_null()) {
      r.error = doc.at("error").get<std::string>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed prediction record: ") + e.what());
  }
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  std::set<std::tuple<std::string, std::string, std::size_t>> keys;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto record = prediction_from_json(doc);
    if (!keys.emplace(record.system_id, record.abstract_id, record.sentence_index).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate prediction for " + record.abstract_id + "#" +
                            std::to_string(record.sentence_index));
    }
    out.push_back(std::move(record));
  }
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) text += prediction_to_json(r).dump() + "\n";
  write_file_atomic(path, text);
}

}  // namespace plaba
