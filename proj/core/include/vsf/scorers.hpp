#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vsf/directive.hpp"
#include "vsf/metrics.hpp"

namespace vsf {

struct ScorerOutput {
  std::string scorer_id;
  std::vector<SubScores> scores;  // one per input trajectory, same order
};

inline constexpr std::size_t kTrajectoryFeatureCount = 16;
inline constexpr std::size_t kEgoFeatureCount = 5;

using TrajectoryFeatures = std::array<double, kTrajectoryFeatureCount>;
using EgoFeatures = std::array<double, kEgoFeatureCount>;

/// Feature names in storage order; the parameter file header repeats them.
const std::array<std::string_view, kTrajectoryFeatureCount>& trajectory_feature_names();
const std::array<std::string_view, kEgoFeatureCount>& ego_feature_names();

TrajectoryFeatures trajectory_features(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
EgoFeatures ego_features(const EgoState& ego);

/// Ground-truth scorer: the metrics module's own sub-scores.
ScorerOutput oracle_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, const MetricConfig& cfg = {});

/// Gaussian draws keyed by (seed, scorer id).
class GaussianScoreNoise {
 public:
  GaussianScoreNoise(std::uint64_t seed, std::string_view scorer_id);
  double draw(double sd) { return sd * unit_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
};

/// Oracle scores plus clipped Gaussian noise.
ScorerOutput add_score_noise(const ScorerOutput& oracle, std::string scorer_id, double noise_sd, std::uint64_t seed);

ScorerOutput noisy_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, std::string scorer_id,
                          double noise_sd, std::uint64_t seed, const MetricConfig& cfg = {});

struct TrainingRow {
  TrajectoryFeatures features{};
  EgoFeatures ego{};
  CognitiveDirective directive;
  SubScores target;
  double weight{1.0};
};

/// Ridge heads over [trajectory features | ego status | directive embedding] plus an unpenalised bias.
struct LinearScorerParams {
  double lambda{1e-3};
  DirectiveEmbedding embedding;
  std::array<std::vector<double>, kMetricCount> weights;
  std::array<double, kMetricCount> bias{};

  [[nodiscard]] std::size_t input_dim() const { return kTrajectoryFeatureCount + kEgoFeatureCount + embedding.dim(); }
};

/// Throws InvalidParams on bad lambda or too few rows; DegenerateDesign when lambda = 0 and the design is singular.
LinearScorerParams fit_linear_scorer(const std::vector<TrainingRow>& rows, double lambda,
                                     const DirectiveEmbedding& embedding);

std::vector<double> linear_input(const TrajectoryFeatures& f, const EgoFeatures& e,
                                 const CognitiveDirective& d, const DirectiveEmbedding& embedding);

/// Unclipped head outputs, exposed for objective checks.
std::array<double, kMetricCount> linear_raw_predict(const LinearScorerParams& params, const std::vector<double>& x);

/// Sum over rows of weight * squared error plus lambda * |w|^2, summed over the nine heads.
double ridge_objective(const LinearScorerParams& params, const std::vector<TrainingRow>& rows);

ScorerOutput linear_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, const EgoState& ego,
                           const CognitiveDirective& directive, const LinearScorerParams& params,
                           std::string scorer_id = "linear", const MetricConfig& cfg = {});

void save_linear_params(const std::filesystem::path& path, const LinearScorerParams& params);
std::string serialize_linear_params(const LinearScorerParams& params);
LinearScorerParams load_linear_params(const std::filesystem::path& path);
LinearScorerParams parse_linear_params(const std::string& text);

/// Spearman rank correlation with average ranks for ties.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace vsf
