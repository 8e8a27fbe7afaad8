#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsf/directive.hpp"
#include "vsf/fusion.hpp"
#include "vsf/lqr.hpp"
#include "vsf/render.hpp"
#include "vsf/vlm_client.hpp"

namespace vsf {

struct ScorerRanking {
  std::string scorer_id;
  std::vector<FusedScore> ranking;  // one entry per candidate
};

struct TopCandidate {
  std::string scorer_id;  // first scorer that proposed it
  std::size_t index{0};   // into the candidate list
  std::string label;      // A, B, ...
};

/// Argmax of each ranking, deduplicated by identical trajectory and lettered in scorer order.
/// Throws EmptyRanking.
std::vector<TopCandidate> top_per_scorer(const std::vector<ScorerRanking>& rankings,
                                         const std::vector<Trajectory>& candidates);

struct FewShotExemplar {
  std::string user_text;
  std::string assistant_text;
};

struct PromptCandidate {
  std::string label;
  double listed_score{0.0};
};

/// System grammar, few-shot pairs, then the live user message with ego status, the candidate
/// letters, a score table and the image slot.
Prompt build_selection_prompt(const Stage& stage, const std::vector<PromptCandidate>& candidates,
                              const std::vector<FewShotExemplar>& few_shot);

Prompt build_directive_prompt(const Stage& stage);

struct SelectionResponse {
  std::string chosen_label;
  std::string raw_text;
};

/// Case-insensitive "SELECTION: <letter>" anchored at a word boundary; the letter must be
/// one of `labels`. Throws UnparseableSelection.
SelectionResponse parse_selection(const std::string& text, const std::vector<std::string>& labels);

struct VlmFusionConfig {
  FusionConfig fusion{FusionConfig::defaults()};
  LqrConfig lqr;
  RenderConfig render;
  std::vector<FewShotExemplar> few_shot;
  int parse_retries{1};
};

struct VlmDiagnostics {
  std::vector<TopCandidate> presented;
  std::vector<TrackingDiagnostics> tracking;  // per presented candidate
  std::vector<std::string> raw_replies;
  bool fallback{false};
  std::string fallback_reason;
};

struct VlmSelection {
  std::size_t index{0};  // into the candidate list
  std::string label;     // empty on fallback
  VlmDiagnostics diagnostics;
};

/// Top candidate per scorer, LQR rollout, overlay, prompt, parse. Falls back to the weight-fusion
/// winner when the reply stays unparseable after the configured retries. Transport errors propagate.
VlmSelection vlm_select(const Stage& stage, const std::vector<Trajectory>& candidates,
                        const std::vector<ScorerOutput>& per_scorer, const VlmFusionConfig& cfg, VlmBackend& backend);

/// Rendered image that vlm_select would send, for the `render` subcommand and golden tests.
Image render_selection(const Stage& stage, const std::vector<Trajectory>& candidates,
                       const std::vector<TopCandidate>& presented, const VlmFusionConfig& cfg);

/// Asks the VLM for a directive; unrecognised replies fall back to the rule-based provider.
class VlmDirectiveProvider final : public DirectiveProvider {
 public:
  explicit VlmDirectiveProvider(VlmBackend& backend, DirectiveRuleConfig fallback = {})
      : backend_(backend), fallback_(fallback) {}
  CognitiveDirective directive(const Stage& stage) override;

 private:
  VlmBackend& backend_;
  DirectiveRuleConfig fallback_;
};

}  // namespace vsf
