#include <cstdlib>

#include "httplib.h"
#include "plaba/adapt.hpp"
#include "plaba/error.hpp"
#include "plaba/util.hpp"

namespace plaba::adapt {

using nlohmann::json;

void BackendConfig::validate() const {
  if (endpoint.empty()) throw ValidationError("backend endpoint is required");
  if (model_name.empty()) throw ValidationError("backend model name is required");
  if (max_concurrency < 1) throw ValidationError("max_concurrency must be at least 1");
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("backend endpoint must be an http(s) URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (!config_.credentials_env.empty()) {
    const char* value = std::getenv(config_.credentials_env.c_str());
    if (!value || !*value) {
      throw AuthError("credentials variable " + config_.credentials_env + " is not set");
    }
    bearer_ = value;
  }
}

std::string parse_backend_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw MalformedResponseError("malformed backend response (not JSON): " + body);
  }
  if (!doc.is_object() || !doc.contains("text") || !doc.at("text").is_string()) {
    throw MalformedResponseError("malformed backend response (expected {\"text\": string}): " + body);
  }
  return doc.at("text").get<std::string>();
}

std::string HttpBackend::generate(const std::string& model, const std::string& prompt,
                                  const json& params) {
  httplib::Client client(scheme_host_port_);
  auto timeout = config_.request_timeout;
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                static_cast<time_t>((timeout.count() % 1000) * 1000));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                          static_cast<time_t>((timeout.count() % 1000) * 1000));
  httplib::Headers headers;
  if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);
  json body = {{"model", model}, {"prompt", prompt}, {"params", params}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientBackendError("request to " + config_.endpoint +
                                " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientBackendError("backend returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw MalformedResponseError("backend returned HTTP " + std::to_string(res->status) + ": " +
                                 res->body);
  }
  return parse_backend_response(res->body);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key(const std::string& model, const std::string& prompt_hash,
                               const json& params) {
  return sha256_hex(model + "\n" + prompt_hash + "\n" + params.dump());
}

std::optional<std::string> ResponseCache::get(const std::string& model,
                                              const std::string& prompt_hash,
                                              const json& params) const {
  auto path = dir_ / (key(model, prompt_hash, params) + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    json doc = json::parse(read_file(path));
    return doc.at("text").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable entry: regenerate
  }
}

void ResponseCache::put(const std::string& model, const std::string& prompt_hash,
                        const json& params, const std::string& text) const {
  json doc = {{"model", model}, {"prompt_hash", prompt_hash}, {"params", params}, {"text", text}};
  write_file_atomic(dir_ / (key(model, prompt_hash, params) + ".json"), doc.dump(2) + "\n");
}

}  // namespace plaba::adapt
