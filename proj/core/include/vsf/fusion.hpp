#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsf/metrics.hpp"
#include "vsf/scorers.hpp"

namespace vsf {

enum class TieBreak { LowestIndex };

/// Weight fusioner configuration.
///
/// The per-scorer aggregate is
///   sum_m w_m * ln(max(s_m, eps))  +  g * ln(max(sum_m v_m s_m / sum_m v_m, eps))
/// where `metric_log_weights` holds w_m and `group_weights` holds v_m. With the
/// penalties at weight 1 and the EPDMS weighted set as the group, the aggregate
/// equals ln(EPDMS) whenever no floor is hit.
struct FusionConfig {
  std::map<Metric, double> metric_log_weights;
  std::map<Metric, double> group_weights;
  double group_log_weight{1.0};
  /// Empty means uniform 1/K.
  std::map<std::string, double> model_weights;
  double epsilon{1e-6};
  TieBreak tie_break{TieBreak::LowestIndex};

  static FusionConfig defaults();
  /// Individual log terms only, no weighted group.
  static FusionConfig log_sum(std::map<Metric, double> weights);
};

void validate(const FusionConfig& cfg);

double aggregate_log(const SubScores& scores, const FusionConfig& cfg);

struct FusedScore {
  std::size_t index{0};
  double score{0.0};
};

/// fused_j = sum_k model_weight_k * aggregate_log(scores_kj). Throws LengthMismatch.
std::vector<FusedScore> fuse_models(const std::vector<ScorerOutput>& per_scorer, const FusionConfig& cfg);

/// Argmax with exact ties going to the lowest index. Throws EmptyCandidates.
std::size_t select_best(const std::vector<FusedScore>& fused, const FusionConfig& cfg = FusionConfig::defaults());

/// Per-candidate aggregate for one scorer, as a ranking input.
std::vector<FusedScore> rank_single(const ScorerOutput& output, const FusionConfig& cfg);

}  // namespace vsf
