#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <json.hpp>
#include <numbers>
#include <thread>

#include "fixtures.hpp"
#include "vsf/error.hpp"
#include "vsf/harness.hpp"
#include "vsf/mock_vlm.hpp"
#include "vsf/scenario_io.hpp"
#include "vsf/vlm_fusion.hpp"

// Last: resolv.h, pulled in by httplib, defines a _res macro that clashes with Eigen.
#include <httplib.h>

using namespace vsf;

namespace {

std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(VSF_TEST_DATA_DIR) / "fixtures" / name;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vsf::Error thrown";
  return ErrorCode::MalformedFile;
}

VlmEndpointConfig fast_endpoint(const std::string& url) {
  VlmEndpointConfig c;
  c.base_url = url;
  c.timeout_s = 5;
  c.backoff_initial_s = 0.001;
  return c;
}

const Prompt& sample_prompt() {
  static const Prompt p{{"system", "Reply with SELECTION: <letter>.", false},
                        {"user", "Candidates: A, B\nCandidate scores:\nA: 0.200000\nB: 0.900000\n", true}};
  return p;
}

std::string tiny_ppm() { return Image(2, 1, {10, 20, 30}).to_ppm(); }

// Replies from a fixed script, recording every prompt.
class ScriptedBackend final : public VlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const Prompt& prompt, const std::optional<std::string>& image) override {
    prompts.push_back(prompt);
    images.push_back(image);
    const std::string r = replies_[std::min(calls_, replies_.size() - 1)];
    ++calls_;
    return r;
  }
  std::vector<Prompt> prompts;
  std::vector<std::optional<std::string>> images;

 private:
  std::vector<std::string> replies_;
  std::size_t calls_{0};
};

struct Fixture {
  Stage stage;
  std::vector<Trajectory> candidates;
  std::vector<ScorerOutput> per_scorer;
};

Fixture noisy_fixture(std::size_t scenario, std::size_t scorers, double sd = 0.3) {
  const auto fleet = gen_fleet(8, 31);
  Fixture f;
  f.stage = make_stage(fleet[scenario], StageIndex::First);
  f.candidates = stage_candidates(fleet[scenario], StageIndex::First, f.stage, {});
  const auto oracle = oracle_scorer(f.candidates, f.stage);
  for (std::size_t k = 0; k < scorers; ++k) {
    f.per_scorer.push_back(add_score_noise(oracle, "s" + std::to_string(k), sd, 100 + k));
  }
  return f;
}

}  // namespace

TEST(WireFormat, RequestBodyMatchesFixture) {
  VlmEndpointConfig cfg;
  cfg.model_name = "vsf-mock";
  const auto body = build_request_body(sample_prompt(), tiny_ppm(), cfg);
  const auto path = fixture_path("request_body.json");
  if (std::getenv("VSF_UPDATE_GOLDEN")) write_text_file(path, body);
  EXPECT_EQ(body, read_text_file(path));
  const auto doc = nlohmann::json::parse(body);
  EXPECT_EQ(doc["temperature"], 0.0);
  const auto& parts = doc["messages"][1]["content"];
  EXPECT_EQ(parts[1]["type"], "image_url");
  EXPECT_EQ(parts[1]["image_url"]["url"].get<std::string>().rfind("data:image/ppm;base64,", 0), 0u);
}

TEST(WireFormat, ResponseFixtureParses) {
  EXPECT_EQ(parse_response_body(read_text_file(fixture_path("response_body.json"))), "SELECTION: B");
}

TEST(WireFormat, MalformedResponsesAreProtocolErrors) {
  EXPECT_EQ(code_of([] { parse_response_body("{\"choices\": ["); }), ErrorCode::ProtocolError);
  EXPECT_EQ(code_of([] { parse_response_body("{\"choices\": []}"); }), ErrorCode::ProtocolError);
  EXPECT_EQ(code_of([] { parse_response_body("{\"choices\": [{\"message\": {}}]}"); }), ErrorCode::ProtocolError);
}

TEST(Endpoint, EnvironmentOverridesDefaults) {
  setenv("VSF_VLM_ENDPOINT", "http://10.1.2.3:9000", 1);
  setenv("VSF_VLM_API_KEY", "k-123", 1);
  const auto cfg = VlmEndpointConfig::from_env();
  unsetenv("VSF_VLM_ENDPOINT");
  unsetenv("VSF_VLM_API_KEY");
  EXPECT_EQ(cfg.base_url, "http://10.1.2.3:9000");
  ASSERT_TRUE(cfg.api_key.has_value());
  EXPECT_EQ(*cfg.api_key, "k-123");
  EXPECT_FALSE(VlmEndpointConfig::from_env().api_key.has_value());
}

TEST(Endpoint, Validation) {
  VlmEndpointConfig c;
  c.timeout_s = 0;
  EXPECT_THROW(validate(c), Error);
  VlmEndpointConfig r;
  r.max_retries = -1;
  EXPECT_THROW(validate(r), Error);
}

TEST(MockPolicy, ReplyRules) {
  const std::string user = "Ego status: ...\nCandidates: A, B, C\nCandidate scores:\nA: 0.200000\nB: 0.900000\nC: 0.100000\n";
  EXPECT_EQ(mock_reply_text(MockPolicy::parse("first"), "sys", user, ""), "SELECTION: A");
  EXPECT_EQ(mock_reply_text(MockPolicy::parse("fixed:C"), "sys", user, ""), "SELECTION: C");
  EXPECT_EQ(mock_reply_text(MockPolicy::parse("rule"), "sys", user, ""), "SELECTION: B");
  EXPECT_EQ(mock_reply_text(MockPolicy::parse("rule"), "Reply with DIRECTIVE: x", user, "DIRECTIVE: Stop, Left"),
            "DIRECTIVE: Stop, Left");
  EXPECT_EQ(MockPolicy::parse("fixed:Q").to_string(), "fixed:Q");
  EXPECT_THROW(MockPolicy::parse("fixed:"), Error);
  EXPECT_THROW(MockPolicy::parse("best"), Error);
}

TEST(MockServer, FixedPolicyOverHttp) {
  MockVlmServer server(MockPolicy::parse("fixed:B"));
  server.start(0);
  EXPECT_EQ(query_vlm(sample_prompt(), tiny_ppm(), fast_endpoint(server.base_url())), "SELECTION: B");
  EXPECT_EQ(server.request_count(), 1);
}

TEST(MockServer, RetriesThroughServerErrors) {
  MockOptions opt;
  opt.fail_first_n = 2;
  MockVlmServer server(MockPolicy::parse("first"), opt);
  server.start(0);
  auto cfg = fast_endpoint(server.base_url());
  cfg.max_retries = 2;
  EXPECT_EQ(query_vlm(sample_prompt(), tiny_ppm(), cfg), "SELECTION: A");
  EXPECT_EQ(server.request_count(), 3);
}

TEST(MockServer, ExhaustedRetriesAreTransportErrors) {
  MockOptions opt;
  opt.fail_first_n = 5;
  MockVlmServer server(MockPolicy::parse("first"), opt);
  server.start(0);
  auto cfg = fast_endpoint(server.base_url());
  cfg.max_retries = 2;
  EXPECT_EQ(code_of([&] { query_vlm(sample_prompt(), std::nullopt, cfg); }), ErrorCode::Transport);
  EXPECT_EQ(server.request_count(), 3);
}

TEST(MockServer, TruncatedBodyIsProtocolError) {
  MockOptions opt;
  opt.truncate = true;
  MockVlmServer server(MockPolicy::parse("first"), opt);
  server.start(0);
  EXPECT_EQ(code_of([&] { query_vlm(sample_prompt(), std::nullopt, fast_endpoint(server.base_url())); }),
            ErrorCode::ProtocolError);
}

TEST(MockServer, UnreachableEndpointIsTransportError) {
  int port = 0;
  {
    MockVlmServer probe(MockPolicy::parse("first"));
    port = probe.start(0);
  }
  auto cfg = fast_endpoint("http://127.0.0.1:" + std::to_string(port));
  cfg.max_retries = 1;
  cfg.timeout_s = 1;
  EXPECT_EQ(code_of([&] { query_vlm(sample_prompt(), std::nullopt, cfg); }), ErrorCode::Transport);
}

TEST(MockServer, BindingATakenPortFails) {
  MockVlmServer a(MockPolicy::parse("first"));
  const int port = a.start(0);
  MockVlmServer b(MockPolicy::parse("first"));
  EXPECT_EQ(code_of([&] { b.start(port); }), ErrorCode::BindFailure);
}

TEST(Client, SendsBearerTokenWhenConfigured) {
  httplib::Server server;
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"content":"SELECTION: A"}}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  auto cfg = fast_endpoint("http://127.0.0.1:" + std::to_string(port));
  cfg.api_key = "secret";
  EXPECT_EQ(query_vlm(sample_prompt(), std::nullopt, cfg), "SELECTION: A");
  server.stop();
  t.join();
  EXPECT_EQ(seen_auth, "Bearer secret");
}

TEST(HttpBackend, ConcurrentQueriesAgainstMock) {
  MockVlmServer server(MockPolicy::parse("rule"));
  server.start(0);
  auto cfg = fast_endpoint(server.base_url());
  cfg.max_in_flight = 2;
  HttpVlmBackend backend(cfg);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      if (backend.complete(sample_prompt(), tiny_ppm()) == "SELECTION: B") ++ok;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 8);
}

TEST(ParseSelection, Examples) {
  const std::vector<std::string> abc{"A", "B", "C"};
  EXPECT_EQ(parse_selection("SELECTION: B", abc).chosen_label, "B");
  EXPECT_EQ(parse_selection("I choose selection: a", abc).chosen_label, "A");
  EXPECT_EQ(code_of([&] { parse_selection("both look fine", abc); }), ErrorCode::UnparseableSelection);
  EXPECT_EQ(code_of([&] { parse_selection("SELECTION: D", abc); }), ErrorCode::UnparseableSelection);
  EXPECT_EQ(code_of([&] { parse_selection("NOSELECTION: A", abc); }), ErrorCode::UnparseableSelection);
}

TEST(TopPerScorer, DistinctAgreeingAndEmpty) {
  std::vector<Trajectory> cands{fixture::straight(0, 0, 0, 5), fixture::straight(0, 0, 0, 6),
                                fixture::straight(0, 0, 0, 7)};
  auto ranking = [](std::size_t best) {
    std::vector<FusedScore> r;
    for (std::size_t i = 0; i < 3; ++i) r.push_back({i, i == best ? 1.0 : 0.0});
    return r;
  };
  const auto distinct = top_per_scorer({{"x", ranking(0)}, {"y", ranking(1)}, {"z", ranking(2)}}, cands);
  ASSERT_EQ(distinct.size(), 3u);
  EXPECT_EQ(distinct[2].label, "C");
  EXPECT_EQ(distinct[1].scorer_id, "y");
  EXPECT_EQ(top_per_scorer({{"x", ranking(1)}, {"y", ranking(1)}, {"z", ranking(1)}}, cands).size(), 1u);
  // Identical trajectories under different indices also merge.
  cands[2] = cands[0];
  EXPECT_EQ(top_per_scorer({{"x", ranking(0)}, {"z", ranking(2)}}, cands).size(), 1u);
  EXPECT_EQ(code_of([&] { top_per_scorer({{"x", ranking(0)}, {"y", {}}}, cands); }), ErrorCode::EmptyRanking);
}

TEST(Prompt, EnumeratesLabelsAndIsDeterministic) {
  const auto st = fixture::open_road(7.5);
  const std::vector<PromptCandidate> two{{"A", 0.25}, {"B", 0.5}};
  const auto p = build_selection_prompt(st, two, {});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].role, "system");
  EXPECT_EQ(p[1].role, "user");
  EXPECT_TRUE(p[1].image_slot);
  EXPECT_NE(p[1].text.find("Candidates: A, B\n"), std::string::npos);
  EXPECT_NE(p[1].text.find("speed 7.50 m/s"), std::string::npos);
  EXPECT_EQ(p, build_selection_prompt(st, two, {}));
  const auto with_shots = build_selection_prompt(st, two, {{"u1", "SELECTION: A"}, {"u2", "SELECTION: B"}});
  ASSERT_EQ(with_shots.size(), 6u);
  EXPECT_EQ(with_shots[2].role, "assistant");
  EXPECT_FALSE(with_shots[1].image_slot);
}

TEST(Prompt, FixtureText) {
  const auto st = fixture::open_road(7.5);
  const auto p = build_selection_prompt(st, {{"A", 0.25}, {"B", 0.5}}, {});
  const std::string joined = p[0].text + "\n---\n" + p[1].text;
  const auto path = fixture_path("selection_prompt.txt");
  if (std::getenv("VSF_UPDATE_GOLDEN")) write_text_file(path, joined);
  EXPECT_EQ(joined, read_text_file(path));
}

TEST(VlmSelect, FixedPolicyReturnsThatCandidate) {
  const auto f = noisy_fixture(0, 4);
  VlmFusionConfig cfg;
  ScriptedBackend probe({"SELECTION: A"});
  const auto first = vlm_select(f.stage, f.candidates, f.per_scorer, cfg, probe);
  const auto& presented = first.diagnostics.presented;
  ASSERT_GE(presented.size(), 2u);
  EXPECT_EQ(probe.prompts.size(), 1u);
  ASSERT_TRUE(probe.images[0].has_value());
  for (const auto& c : presented) {
    ScriptedBackend backend({"SELECTION: " + c.label});
    const auto sel = vlm_select(f.stage, f.candidates, f.per_scorer, cfg, backend);
    EXPECT_EQ(sel.index, c.index);
    EXPECT_EQ(sel.label, c.label);
    EXPECT_FALSE(sel.diagnostics.fallback);
    EXPECT_EQ(sel.diagnostics.tracking.size(), presented.size());
  }
}

TEST(VlmSelect, UnparseableRepliesFallBackToWeightFusion) {
  const auto f = noisy_fixture(2, 3);
  VlmFusionConfig cfg;
  ScriptedBackend backend({"hmm", "still thinking"});
  const auto sel = vlm_select(f.stage, f.candidates, f.per_scorer, cfg, backend);
  EXPECT_TRUE(sel.diagnostics.fallback);
  EXPECT_EQ(backend.prompts.size(), 2u);  // one retry
  EXPECT_EQ(sel.index, select_best(fuse_models(f.per_scorer, cfg.fusion), cfg.fusion));
  EXPECT_TRUE(sel.label.empty());
  EXPECT_FALSE(sel.diagnostics.fallback_reason.empty());
}

TEST(VlmSelect, RetryRecoversFromOneBadReply) {
  const auto f = noisy_fixture(2, 3);
  ScriptedBackend backend({"no idea", "SELECTION: A"});
  const auto sel = vlm_select(f.stage, f.candidates, f.per_scorer, {}, backend);
  EXPECT_FALSE(sel.diagnostics.fallback);
  EXPECT_EQ(sel.label, "A");
  EXPECT_EQ(sel.diagnostics.raw_replies.size(), 2u);
}

TEST(VlmSelect, NoVisibleCandidateFallsBack) {
  auto st = fixture::open_road(5.0);
  st.camera.extrinsic.yaw = std::numbers::pi;  // looking backwards
  const std::vector<Trajectory> cands{fixture::straight(0, 0, 0, 5), fixture::straight(0, 0, 0, 6)};
  ScorerOutput s{"only", score_candidates(cands, st)};
  ScriptedBackend backend({"SELECTION: A"});
  const auto sel = vlm_select(st, cands, {s}, {}, backend);
  EXPECT_TRUE(sel.diagnostics.fallback);
  EXPECT_TRUE(backend.prompts.empty());
}

TEST(VlmSelect, TransportErrorsPropagate) {
  const auto f = noisy_fixture(1, 2);
  MockOptions opt;
  opt.fail_first_n = 100;
  MockVlmServer server(MockPolicy::parse("first"), opt);
  server.start(0);
  auto cfg = fast_endpoint(server.base_url());
  cfg.max_retries = 1;
  HttpVlmBackend backend(cfg);
  EXPECT_EQ(code_of([&] { vlm_select(f.stage, f.candidates, f.per_scorer, {}, backend); }), ErrorCode::Transport);
}

TEST(VlmSelect, ListedScoresDriveTheRulePolicy) {
  const auto f = noisy_fixture(3, 4);
  MockVlmServer server(MockPolicy::parse("rule"));
  server.start(0);
  HttpVlmBackend backend(fast_endpoint(server.base_url()));
  VlmFusionConfig cfg;
  const auto sel = vlm_select(f.stage, f.candidates, f.per_scorer, cfg, backend);
  const auto fused = fuse_models(f.per_scorer, cfg.fusion);
  std::size_t want = sel.diagnostics.presented.front().index;
  for (const auto& c : sel.diagnostics.presented) {
    if (fused[c.index].score > fused[want].score) want = c.index;
  }
  EXPECT_EQ(sel.index, want);
}

TEST(DirectiveProvider, UsesVlmReplyOrFallsBack) {
  auto st = fixture::open_road(5.0);
  ScriptedBackend good({"DIRECTIVE: Decelerate, Left"});
  EXPECT_EQ(VlmDirectiveProvider(good).directive(st), (CognitiveDirective{Longitudinal::Decelerate, Lateral::Left}));
  ASSERT_TRUE(good.images[0].has_value());
  ScriptedBackend bad({"no opinion"});
  EXPECT_EQ(VlmDirectiveProvider(bad).directive(st), rule_based_directive(st.ego, st));
}
