#include "httplib.h"

#include "plaba/server.hpp"

namespace plaba::server {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

json ack_json(const Ack& ack) {
  return {{"ok", true}, {"stored", ack.stored}, {"duplicate", !ack.stored}, {"record", ack.record}};
}

// Maps the error hierarchy onto status codes.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const UnknownReferenceError& e) {
      send_error(res, 404, e.what());
    } catch (const NothingToReportError& e) {
      send_error(res, 404, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

HttpFrontend::HttpFrontend(EvaluationService& service,
                           std::optional<std::filesystem::path> static_dir)
    : service_(service), http_(std::make_unique<httplib::Server>()) {
  auto& http = *http_;

  http.Get("/api/tasks/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) throw ValidationError("missing ?annotator= parameter");
    auto task = service_.next_task(req.get_param_value("annotator"));
    if (!task) {
      send_json(res, 200, {{"done", true}, {"task", nullptr}});
      return;
    }
    send_json(res, 200,
              {{"done", false},
               {"task",
                {{"task_id", task->task_id},
                 {"annotator_id", task->annotator_id},
                 {"kind", task_kind_name(task->kind)},
                 {"payload", task->payload}}}});
  }));

  http.Post("/api/judgments", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, ack_json(service_.submit_judgment(judgment_submission_from_json(parse_body(req)))));
  }));

  http.Post("/api/rankings", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, ack_json(service_.submit_ranking(ranking_submission_from_json(parse_body(req)))));
  }));

  http.Post("/api/accuracy-selection",
            guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, ack_json(service_.submit_selection(
                                      selection_submission_from_json(parse_body(req)))));
            }));

  http.Get("/api/reports/automatic",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
             std::string system = req.has_param("system") ? req.get_param_value("system") : "";
             res.status = 200;
             res.set_content(service_.automatic_report(system), "application/json");
           }));

  http.Get("/api/reports/human", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto report = service_.human_report();
    if (req.has_param("format") && req.get_param_value("format") == "text") {
      res.status = 200;
      res.set_content(humaneval::format_human_table(report), "text/plain");
      return;
    }
    send_json(res, 200, humaneval::human_report_to_json(report));
  }));

  http.Get("/api/session", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service_.session_progress());
  }));

  if (static_dir) {
    if (!http.set_mount_point("/", static_dir->string())) {
      throw IoError("static directory not found: " + static_dir->string());
    }
  }
}

HttpFrontend::~HttpFrontend() { stop(); }

bool HttpFrontend::listen(const std::string& host, int port) { return http_->listen(host, port); }

int HttpFrontend::bind_to_any_port(const std::string& host) { return http_->bind_to_any_port(host); }

bool HttpFrontend::listen_after_bind() { return http_->listen_after_bind(); }

void HttpFrontend::stop() {
  if (http_) http_->stop();
}

void HttpFrontend::wait_until_ready() const { http_->wait_until_ready(); }

}  // namespace plaba::server
