#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

namespace vsf {

struct MockPolicy {
  enum class Kind { First, Fixed, RuleHighestListedScore };
  Kind kind{Kind::First};
  std::string label;  // Fixed only

  /// "first", "fixed:<letter>" or "rule". Throws InvalidConfig.
  static MockPolicy parse(const std::string& text);
  [[nodiscard]] std::string to_string() const;
};

struct MockOptions {
  int fail_first_n{0};       // answer HTTP 500 to the first n requests
  int garble_first_n{0};     // answer selection prompts without the reply grammar, n times
  bool truncate{false};      // cut every response body in half
  std::string directive_reply{"DIRECTIVE: Keep, Forward"};
  std::string host{"127.0.0.1"};
};

/// The reply text the mock gives for a prompt, independent of HTTP.
std::string mock_reply_text(const MockPolicy& policy, const std::string& system_text, const std::string& user_text,
                            const std::string& directive_reply);

/// Deterministic chat-completion responder on a background thread.
class MockVlmServer {
 public:
  MockVlmServer(MockPolicy policy, MockOptions options = {});
  ~MockVlmServer();
  MockVlmServer(const MockVlmServer&) = delete;
  MockVlmServer& operator=(const MockVlmServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws BindFailure.
  int start(int port = 0);
  void stop();
  /// Blocks the caller until stop() is called from elsewhere.
  void serve_forever(int port);

  [[nodiscard]] int port() const { return port_; }
  [[nodiscard]] std::string base_url() const;
  [[nodiscard]] int request_count() const { return requests_.load(); }

 private:
  struct Impl;
  int bind(int port);

  MockPolicy policy_;
  MockOptions options_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_{0};
  std::atomic<int> requests_{0};
  std::atomic<int> garbled_{0};
};

}  // namespace vsf
