// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gestura/error.hpp"
#include "gestura/llm.hpp"

namespace gestura {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "provider_url needs a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(HttpBackendConfig cfg, std::string key) : cfg_(std::move(cfg)), key_(std::move(key)) {
    endpoint_ = split_url(cfg_.provider_url);
  }

  Completion complete(const CompletionRequest& request) override {
    request.validate();
    json body = {{"model", cfg_.model_id}, {"temperature", request.temperature}};
    body["messages"] = json::array();
    for (const auto& m : request.messages) {
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }

    // httplib clients are not shareable across threads; one per call.
    httplib::Client client(endpoint_.origin);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    const httplib::Headers headers = {{"Authorization", "Bearer " + key_}};

    const auto t0 = std::chrono::steady_clock::now();
    const auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
    const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!res) throw Error(ErrorCode::TransportError, "request failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::AuthError, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 429) throw Error(ErrorCode::RateLimited, "HTTP 429");
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(res->status));
    }

    Completion c;
    try {
      const auto doc = json::parse(res->body);
      c.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      if (doc.contains("usage")) {
        const auto& u = doc.at("usage");
        c.usage.input_tokens = u.value("prompt_tokens", std::int64_t{0});
        c.usage.output_tokens = u.value("completion_tokens", std::int64_t{0});
      } else {
        for (const auto& m : request.messages) c.usage.input_tokens += approximate_tokens(m.content);
        c.usage.output_tokens = approximate_tokens(c.text);
        c.usage.approximate = true;
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::TransportError, std::string("unexpected provider response: ") + e.what());
    }
    c.usage.latency_s = latency;
    return c;
  }

 private:
  HttpBackendConfig cfg_;
  std::string key_;
  Endpoint endpoint_;
};

}  // namespace

HttpBackendConfig parse_http_config(std::string_view json_text) {
  HttpBackendConfig cfg;
  try {
    const auto doc = json::parse(json_text);
    cfg.provider_url = doc.value("provider_url", cfg.provider_url);
    cfg.model_id = doc.value("model_id", cfg.model_id);
    cfg.timeout_s = doc.value("timeout_s", cfg.timeout_s);
    cfg.api_key_env = doc.value("api_key_env", cfg.api_key_env);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("backend config: ") + e.what());
  }
  if (!(cfg.timeout_s > 0.0)) throw Error(ErrorCode::MalformedInput, "timeout_s must be positive");
  return cfg;
}

std::shared_ptr<ChatBackend> make_http_backend(const HttpBackendConfig& cfg) {
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::AuthError, "environment variable " + cfg.api_key_env + " is not set");
  }
  return std::make_shared<HttpBackend>(cfg, key);
}

}  // namespace gestura
