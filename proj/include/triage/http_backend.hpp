#pragma once

// Neutral HTTP LLM backend:
//   POST <endpoint>  {"prompt", "temperature", "max_output_tokens", "model"?}
//   200              {"text": "..."}
// Bearer token from TRIAGE_LLM_TOKEN. Vendor adapters sit behind the endpoint.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "triage/llm_backend.hpp"

namespace triage {

struct HttpBackendConfig {
  std::string endpoint;  // http://host[:port]/path
  std::string model;
  std::string token;
  int timeout_seconds = 60;

  /// TRIAGE_LLM_ENDPOINT / TRIAGE_LLM_TOKEN fill whatever is left empty.
  static HttpBackendConfig from_environment(HttpBackendConfig base) {
    if (base.endpoint.empty()) {
      if (const char* e = std::getenv("TRIAGE_LLM_ENDPOINT")) base.endpoint = e;
    }
    if (base.token.empty()) {
      if (const char* t = std::getenv("TRIAGE_LLM_TOKEN")) base.token = t;
    }
    return base;
  }
  static HttpBackendConfig from_environment() { return from_environment(HttpBackendConfig()); }
};

class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "HTTP backend needs an endpoint");
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "endpoint lacks a scheme", cfg_.endpoint);
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    origin_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  }

  std::string complete(const LlmRequest& request) const override {
    httplib::Client client(origin_);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);

    nlohmann::ordered_json body = {{"prompt", request.prompt},
                                   {"temperature", request.temperature},
                                   {"max_output_tokens", request.max_output_tokens}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransientBackendError("transport failure: " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 429) {
      throw TransientBackendError("status " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorKind::BackendError, excerpt(res->body), "status " + std::to_string(res->status));
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string()) {
      throw Error(ErrorKind::BackendError, "response lacks a string 'text': " + excerpt(res->body),
                  "status " + std::to_string(res->status));
    }
    return reply["text"].get<std::string>();
  }

  bool probe() const override {
    httplib::Client client(origin_);
    client.set_connection_timeout(2, 0);
    return static_cast<bool>(client.Get(path_));
  }

  std::string describe() const override { return "http:" + cfg_.endpoint; }

 private:
  static std::string excerpt(const std::string& body) { return body.substr(0, 200); }

  HttpBackendConfig cfg_;
  std::string origin_;
  std::string path_;
};

}  // namespace triage
