#include "vsf/vlm_client.hpp"

#include <httplib.h>

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "vsf/error.hpp"

namespace vsf {

using nlohmann::json;

VlmEndpointConfig VlmEndpointConfig::from_env() {
  VlmEndpointConfig cfg;
  if (const char* url = std::getenv("VSF_VLM_ENDPOINT"); url && *url) cfg.base_url = url;
  if (const char* key = std::getenv("VSF_VLM_API_KEY"); key && *key) cfg.api_key = key;
  return cfg;
}

void validate(const VlmEndpointConfig& cfg) {
  auto bad = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (cfg.base_url.empty()) bad("base_url must not be empty");
  if (!(cfg.timeout_s > 0.0)) bad("timeout must be > 0");
  if (cfg.max_retries < 0) bad("max_retries must be >= 0");
  if (!(cfg.backoff_initial_s >= 0.0)) bad("backoff must be >= 0");
  if (cfg.max_in_flight == 0) bad("max_in_flight must be >= 1");
}

std::string build_request_body(const Prompt& prompt, const std::optional<std::string>& image_ppm,
                               const VlmEndpointConfig& cfg) {
  json messages = json::array();
  bool image_used = false;
  for (const auto& m : prompt) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    if (m.image_slot && image_ppm && !image_used) {
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/ppm;base64," + httplib::detail::base64_encode(*image_ppm)}}}});
      image_used = true;
    }
    messages.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json body = {{"model", cfg.model_name}, {"temperature", cfg.temperature}, {"messages", std::move(messages)}};
  return body.dump();
}

std::string parse_response_body(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::ProtocolError, "response body is not valid JSON");
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::ProtocolError, "response has no choices");
  }
  const json& first = choices->front();
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw Error(ErrorCode::ProtocolError, "choice has no message");
  }
  const json& content = first["message"].value("content", json());
  if (!content.is_string()) throw Error(ErrorCode::ProtocolError, "message content is not a string");
  return content.get<std::string>();
}

std::string query_vlm(const Prompt& prompt, const std::optional<std::string>& image_ppm,
                      const VlmEndpointConfig& cfg) {
  validate(cfg);
  const std::string body = build_request_body(prompt, image_ppm, cfg);
  httplib::Client client(cfg.base_url);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (cfg.api_key) headers.emplace("Authorization", "Bearer " + *cfg.api_key);

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg.backoff_initial_s * std::ldexp(1.0, attempt - 1)));
    }
    auto res = client.Post("/v1/chat/completions", headers, body, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw Error(ErrorCode::ProtocolError, "HTTP " + std::to_string(res->status));
    return parse_response_body(res->body);
  }
  throw Error(ErrorCode::Transport, cfg.base_url + " after " + std::to_string(cfg.max_retries + 1) +
                                        " attempts: " + last_failure);
}

struct HttpVlmBackend::Gate {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight{0};
};

HttpVlmBackend::HttpVlmBackend(VlmEndpointConfig cfg) : cfg_(std::move(cfg)), gate_(std::make_unique<Gate>()) {
  validate(cfg_);
}

HttpVlmBackend::~HttpVlmBackend() = default;

std::string HttpVlmBackend::complete(const Prompt& prompt, const std::optional<std::string>& image_ppm) {
  {
    std::unique_lock lock(gate_->mu);
    gate_->cv.wait(lock, [&] { return gate_->in_flight < cfg_.max_in_flight; });
    ++gate_->in_flight;
  }
  struct Release {
    Gate& g;
    ~Release() {
      {
        std::lock_guard lock(g.mu);
        --g.in_flight;
      }
      g.cv.notify_one();
    }
  } release{*gate_};
  return query_vlm(prompt, image_ppm, cfg_);
}

}  // namespace vsf
