#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace plaba {

// One system's adaptation of one source sentence. An empty output list
// means the system dropped the sentence; `error` is set when generation
// failed after all retries, so failures are explicit rather than gaps.
struct PredictionRecord {
  std::string system_id;
  std::string abstract_id;
  std::size_t sentence_index = 0;
  std::vector<std::string> output_sentences;
  std::string prompt_hash;
  nlohmann::json model_params = nlohmann::json::object();
  std::optional<std::string> error;

  std::string candidate_text() const;
  bool operator==(const PredictionRecord&) const = default;
};

nlohmann::json prediction_to_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(const nlohmann::json& doc);

// JSON Lines, one record per line.
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path);

}  // namespace plaba
