#include "vsf/fusion.hpp"

#include <cmath>

#include "vsf/error.hpp"

namespace vsf {

FusionConfig FusionConfig::defaults() {
  FusionConfig cfg;
  const MetricWeights epdms = MetricWeights::defaults();
  for (Metric m : epdms.penalty_set) cfg.metric_log_weights[m] = 1.0;
  cfg.group_weights = epdms.weighted;
  cfg.group_log_weight = 1.0;
  return cfg;
}

FusionConfig FusionConfig::log_sum(std::map<Metric, double> weights) {
  FusionConfig cfg;
  cfg.metric_log_weights = std::move(weights);
  cfg.group_log_weight = 0.0;
  return cfg;
}

void validate(const FusionConfig& cfg) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) bad("epsilon must lie in (0, 1)");
  bool any_positive = false;
  for (const auto& [m, w] : cfg.metric_log_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) bad(std::string(metric_name(m)) + " log weight must be >= 0");
    any_positive = any_positive || w > 0.0;
  }
  double group_total = 0.0;
  for (const auto& [m, w] : cfg.group_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) bad(std::string(metric_name(m)) + " group weight must be >= 0");
    group_total += w;
  }
  if (!(cfg.group_log_weight >= 0.0)) bad("group log weight must be >= 0");
  if (cfg.group_log_weight > 0.0) {
    if (!(group_total > 0.0)) bad("group weights must sum to > 0");
    any_positive = true;
  }
  if (!any_positive) bad("at least one metric weight must be > 0");
  for (const auto& [id, w] : cfg.model_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) bad("model weight for '" + id + "' must be > 0");
  }
}

namespace {

double aggregate_unchecked(const SubScores& scores, const FusionConfig& cfg) {
  double total = 0.0;
  for (const auto& [m, w] : cfg.metric_log_weights) {
    if (w > 0.0) total += w * std::log(std::max(scores[m], cfg.epsilon));
  }
  if (cfg.group_log_weight > 0.0) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [m, w] : cfg.group_weights) {
      num += w * scores[m];
      den += w;
    }
    total += cfg.group_log_weight * std::log(std::max(num / den, cfg.epsilon));
  }
  return total;
}

}  // namespace

double aggregate_log(const SubScores& scores, const FusionConfig& cfg) {
  validate(cfg);
  return aggregate_unchecked(scores, cfg);
}

std::vector<FusedScore> fuse_models(const std::vector<ScorerOutput>& per_scorer, const FusionConfig& cfg) {
  validate(cfg);
  if (per_scorer.empty()) throw Error(ErrorCode::EmptyCandidates, "no scorer outputs to fuse");
  const std::size_t n = per_scorer.front().scores.size();
  for (const auto& out : per_scorer) {
    if (out.scores.size() != n) {
      throw Error(ErrorCode::LengthMismatch, "scorer '" + out.scorer_id + "' covers a different candidate list");
    }
  }
  std::vector<double> weights;
  for (const auto& out : per_scorer) {
    if (cfg.model_weights.empty()) {
      weights.push_back(1.0 / static_cast<double>(per_scorer.size()));
    } else {
      auto it = cfg.model_weights.find(out.scorer_id);
      if (it == cfg.model_weights.end()) {
        throw Error(ErrorCode::InvalidConfig, "no model weight for scorer '" + out.scorer_id + "'");
      }
      weights.push_back(it->second);
    }
  }
  std::vector<FusedScore> fused(n);
  for (std::size_t j = 0; j < n; ++j) {
    fused[j].index = j;
    for (std::size_t k = 0; k < per_scorer.size(); ++k) {
      fused[j].score += weights[k] * aggregate_unchecked(per_scorer[k].scores[j], cfg);
    }
  }
  return fused;
}

std::size_t select_best(const std::vector<FusedScore>& fused, const FusionConfig& /*cfg*/) {
  if (fused.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates to select from");
  const FusedScore* best = &fused.front();
  for (const auto& f : fused) {
    if (f.score > best->score || (f.score == best->score && f.index < best->index)) best = &f;
  }
  return best->index;
}

std::vector<FusedScore> rank_single(const ScorerOutput& output, const FusionConfig& cfg) {
  validate(cfg);
  std::vector<FusedScore> out(output.scores.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {j, aggregate_unchecked(output.scores[j], cfg)};
  return out;
}

}  // namespace vsf
