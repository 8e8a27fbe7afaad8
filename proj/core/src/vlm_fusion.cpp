#include "vsf/vlm_fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <regex>

#include "vsf/error.hpp"

namespace vsf {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string ego_status(const EgoState& ego) {
  return "Ego status: speed " + fixed(ego.speed, 2) + " m/s, acceleration " + fixed(ego.accel, 2) +
         " m/s^2, command " + std::string(to_string(ego.command));
}

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

}  // namespace

std::vector<TopCandidate> top_per_scorer(const std::vector<ScorerRanking>& rankings,
                                         const std::vector<Trajectory>& candidates) {
  std::vector<TopCandidate> out;
  for (const auto& r : rankings) {
    if (r.ranking.empty()) throw Error(ErrorCode::EmptyRanking, "scorer '" + r.scorer_id + "' ranked nothing");
  }
  for (const auto& r : rankings) {
    const std::size_t best = select_best(r.ranking);
    if (best >= candidates.size()) throw Error(ErrorCode::LengthMismatch, "ranking index outside the candidate list");
    const bool seen = std::any_of(out.begin(), out.end(), [&](const TopCandidate& c) {
      return c.index == best || candidates[c.index] == candidates[best];
    });
    if (seen) continue;
    if (out.size() == 26) throw Error(ErrorCode::InvalidConfig, "more than 26 distinct top candidates");
    out.push_back({r.scorer_id, best, letter(out.size())});
  }
  return out;
}

Prompt build_selection_prompt(const Stage& stage, const std::vector<PromptCandidate>& candidates,
                              const std::vector<FewShotExemplar>& few_shot) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates to present");
  Prompt p;
  p.push_back({"system",
               "You are the final trajectory selector of an autonomous driving planner. Each candidate trajectory "
               "is drawn on the front-view image in its own colour and marked with its letter. Choose the candidate "
               "that avoids collisions, stays on the drivable area, obeys traffic lights and makes progress along "
               "the route. Reply with exactly one line of the form SELECTION: <letter>.",
               false});
  for (const auto& ex : few_shot) {
    p.push_back({"user", ex.user_text, false});
    p.push_back({"assistant", ex.assistant_text, false});
  }
  std::string user = ego_status(stage.ego) + "\nCandidates: ";
  for (std::size_t i = 0; i < candidates.size(); ++i) user += (i ? ", " : "") + candidates[i].label;
  user += "\nCandidate scores:\n";
  for (const auto& c : candidates) user += c.label + ": " + fixed(c.listed_score, 6) + "\n";
  user += "The front-view image with the candidates is attached.";
  p.push_back({"user", std::move(user), true});
  return p;
}

Prompt build_directive_prompt(const Stage& stage) {
  Prompt p;
  p.push_back({"system",
               "You advise an autonomous driving planner. Looking at the front-view image and the ego status, give "
               "one longitudinal action (Keep, Accelerate, Decelerate, Stop) and one lateral action (Forward, Left, "
               "Right). Reply with exactly one line of the form DIRECTIVE: <longitudinal>, <lateral>.",
               false});
  p.push_back({"user", ego_status(stage.ego) + "\nThe front-view image is attached.", true});
  return p;
}

SelectionResponse parse_selection(const std::string& text, const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyCandidates, "no labels to select from");
  static const std::regex grammar(R"(\bselection\s*:\s*([a-z])\b)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, grammar)) {
    throw Error(ErrorCode::UnparseableSelection, "no 'SELECTION: <letter>' in reply");
  }
  const std::string chosen(1, static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0]))));
  if (std::find(labels.begin(), labels.end(), chosen) == labels.end()) {
    throw Error(ErrorCode::UnparseableSelection, "reply selected '" + chosen + "', which was not presented");
  }
  return {chosen, text};
}

Image render_selection(const Stage& stage, const std::vector<Trajectory>& candidates,
                       const std::vector<TopCandidate>& presented, const VlmFusionConfig& cfg) {
  std::vector<RenderCandidate> drawn;
  for (const auto& c : presented) {
    const Trajectory& ref = candidates.at(c.index);
    drawn.push_back({c.label, track_trajectory(ref, to_bicycle(ref[0]), cfg.lqr).simulated});
  }
  return render_overlay(stage, drawn, cfg.render);
}

VlmSelection vlm_select(const Stage& stage, const std::vector<Trajectory>& candidates,
                        const std::vector<ScorerOutput>& per_scorer, const VlmFusionConfig& cfg, VlmBackend& backend) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates");
  const auto fused = fuse_models(per_scorer, cfg.fusion);
  if (fused.size() != candidates.size()) throw Error(ErrorCode::LengthMismatch, "scores do not cover the candidates");
  const std::size_t wf_winner = select_best(fused, cfg.fusion);

  std::vector<ScorerRanking> rankings;
  for (const auto& out : per_scorer) rankings.push_back({out.scorer_id, rank_single(out, cfg.fusion)});

  VlmSelection sel;
  auto& diag = sel.diagnostics;
  diag.presented = top_per_scorer(rankings, candidates);

  std::vector<RenderCandidate> drawn;
  std::vector<PromptCandidate> listed;
  std::vector<std::string> labels;
  for (const auto& c : diag.presented) {
    const Trajectory& ref = candidates[c.index];
    auto tracked = track_trajectory(ref, to_bicycle(ref[0]), cfg.lqr);
    diag.tracking.push_back(tracked.diagnostics);
    drawn.push_back({c.label, std::move(tracked.simulated)});
    listed.push_back({c.label, std::exp(fused[c.index].score)});
    labels.push_back(c.label);
  }

  auto fall_back = [&](std::string reason) {
    sel.index = wf_winner;
    sel.label.clear();
    diag.fallback = true;
    diag.fallback_reason = std::move(reason);
    return sel;
  };

  std::optional<std::string> image;
  try {
    image = render_overlay(stage, drawn, cfg.render).to_ppm();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoVisiblePoints) throw;
    return fall_back(e.what());
  }

  const Prompt prompt = build_selection_prompt(stage, listed, cfg.few_shot);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.parse_retries; ++attempt) {
    diag.raw_replies.push_back(backend.complete(prompt, image));
    try {
      const auto resp = parse_selection(diag.raw_replies.back(), labels);
      const auto it = std::find(labels.begin(), labels.end(), resp.chosen_label);
      const auto& chosen = diag.presented[static_cast<std::size_t>(it - labels.begin())];
      sel.index = chosen.index;
      sel.label = chosen.label;
      return sel;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableSelection) throw;
      last_error = e.what();
    }
  }
  return fall_back(last_error);
}

CognitiveDirective VlmDirectiveProvider::directive(const Stage& stage) {
  const std::string image = render_scene(stage).to_ppm();
  const std::string reply = backend_.complete(build_directive_prompt(stage), image);
  try {
    return parse_directive_reply(reply);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnrecognizedDirective) throw;
    return rule_based_directive(stage.ego, stage, fallback_);
  }
}

}  // namespace vsf
