#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vsf {

struct ChatMessage {
  std::string role;  // system, user or assistant
  std::string text;
  bool image_slot{false};  // the rendered image is attached to this message
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using Prompt = std::vector<ChatMessage>;

struct VlmEndpointConfig {
  std::string base_url{"http://127.0.0.1:8080"};
  std::string model_name{"vsf-mock"};
  double timeout_s{10.0};
  int max_retries{2};
  double temperature{0.0};
  double backoff_initial_s{0.05};
  std::optional<std::string> api_key;
  std::size_t max_in_flight{4};

  /// Defaults overridden by VSF_VLM_ENDPOINT and VSF_VLM_API_KEY when set.
  static VlmEndpointConfig from_env();
};

/// Throws InvalidConfig.
void validate(const VlmEndpointConfig& cfg);

/// Chat-completion body. The image goes into the first message with an image slot as a
/// data:image/ppm;base64 URL.
std::string build_request_body(const Prompt& prompt, const std::optional<std::string>& image_ppm,
                               const VlmEndpointConfig& cfg);

/// choices[0].message.content. Throws ProtocolError.
std::string parse_response_body(const std::string& body);

/// One chat completion with exponential backoff on transport failures and 5xx replies.
/// Throws Transport once retries are exhausted, ProtocolError on 4xx or a malformed body.
std::string query_vlm(const Prompt& prompt, const std::optional<std::string>& image_ppm,
                      const VlmEndpointConfig& cfg);

/// Anything that can answer a prompt; tests and the pipeline share this seam.
class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual std::string complete(const Prompt& prompt, const std::optional<std::string>& image_ppm) = 0;
};

/// HTTP backend with a bounded number of requests in flight.
class HttpVlmBackend final : public VlmBackend {
 public:
  explicit HttpVlmBackend(VlmEndpointConfig cfg);
  ~HttpVlmBackend() override;
  std::string complete(const Prompt& prompt, const std::optional<std::string>& image_ppm) override;

 private:
  struct Gate;
  VlmEndpointConfig cfg_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace vsf
