#include "vsf/mock_vlm.hpp"

#include <httplib.h>

#include <json.hpp>
#include <limits>
#include <regex>
#include <sstream>

#include "vsf/error.hpp"

namespace vsf {

using nlohmann::json;

MockPolicy MockPolicy::parse(const std::string& text) {
  if (text == "first") return {Kind::First, {}};
  if (text == "rule") return {Kind::RuleHighestListedScore, {}};
  if (text.rfind("fixed:", 0) == 0 && text.size() == 7 && text[6] >= 'A' && text[6] <= 'Z') {
    return {Kind::Fixed, text.substr(6)};
  }
  throw Error(ErrorCode::InvalidConfig, "mock policy must be first, rule or fixed:<A-Z>, got '" + text + "'");
}

std::string MockPolicy::to_string() const {
  switch (kind) {
    case Kind::First: return "first";
    case Kind::Fixed: return "fixed:" + label;
    case Kind::RuleHighestListedScore: return "rule";
  }
  return "first";
}

std::string mock_reply_text(const MockPolicy& policy, const std::string& system_text, const std::string& user_text,
                            const std::string& directive_reply) {
  if (system_text.find("DIRECTIVE:") != std::string::npos) return directive_reply;
  switch (policy.kind) {
    case MockPolicy::Kind::Fixed: return "SELECTION: " + policy.label;
    case MockPolicy::Kind::First: {
      static const std::regex candidates(R"((?:^|\n)Candidates: ([A-Z]))");
      std::smatch m;
      return "SELECTION: " + (std::regex_search(user_text, m, candidates) ? m[1].str() : std::string("A"));
    }
    case MockPolicy::Kind::RuleHighestListedScore: {
      static const std::regex row(R"((?:^|\n)([A-Z]): ([-+0-9.eE]+))");
      std::string best = "A";
      double best_score = -std::numeric_limits<double>::infinity();
      for (auto it = std::sregex_iterator(user_text.begin(), user_text.end(), row); it != std::sregex_iterator(); ++it) {
        const double s = std::stod((*it)[2].str());
        if (s > best_score) {
          best_score = s;
          best = (*it)[1].str();
        }
      }
      return "SELECTION: " + best;
    }
  }
  return "SELECTION: A";
}

struct MockVlmServer::Impl {
  httplib::Server server;
};

MockVlmServer::MockVlmServer(MockPolicy policy, MockOptions options)
    : policy_(std::move(policy)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    const int n = requests_.fetch_add(1);
    if (n < options_.fail_first_n) {
      res.status = 500;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return;
    }
    json doc = json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("messages") || !doc["messages"].is_array()) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    std::string system_text;
    std::string user_text;
    for (const auto& m : doc["messages"]) {
      std::string text;
      if (m.contains("content") && m["content"].is_array()) {
        for (const auto& part : m["content"]) {
          if (part.value("type", "") == "text") text += part.value("text", "");
        }
      } else if (m.contains("content") && m["content"].is_string()) {
        text = m["content"].get<std::string>();
      }
      const std::string role = m.value("role", "");
      if (role == "system") system_text = text;
      if (role == "user") user_text = text;  // the last user message is the live query
    }
    std::string reply = mock_reply_text(policy_, system_text, user_text, options_.directive_reply);
    if (reply.rfind("SELECTION:", 0) == 0 && garbled_.fetch_add(1) < options_.garble_first_n) {
      reply = "Both candidates look reasonable to me.";
    }
    json body = {{"id", "mock-" + std::to_string(n)},
                 {"object", "chat.completion"},
                 {"model", doc.value("model", "")},
                 {"choices", json::array({{{"index", 0},
                                           {"message", {{"role", "assistant"}, {"content", reply}}},
                                           {"finish_reason", "stop"}}})}};
    std::string text = body.dump();
    if (options_.truncate) text.resize(text.size() / 2);
    res.set_content(text, "application/json");
  });
}

MockVlmServer::~MockVlmServer() { stop(); }

int MockVlmServer::bind(int port) {
  // httplib's default adds SO_REUSEPORT, which would let two servers share a port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  int bound = port == 0 ? impl_->server.bind_to_any_port(options_.host)
                        : (impl_->server.bind_to_port(options_.host, port) ? port : -1);
  if (bound <= 0) {
    throw Error(ErrorCode::BindFailure, "cannot bind " + options_.host + ":" + std::to_string(port));
  }
  port_ = bound;
  return bound;
}

int MockVlmServer::start(int port) {
  const int bound = bind(port);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MockVlmServer::serve_forever(int port) {
  bind(port);
  impl_->server.listen_after_bind();
}

void MockVlmServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockVlmServer::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_); }

}  // namespace vsf
