#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

enum class Metric { NC, DAC, DDC, TLC, EP, TTC, LK, HC, EC };
inline constexpr std::size_t kMetricCount = 9;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{Metric::NC, Metric::DAC, Metric::DDC,
                                                              Metric::TLC, Metric::EP, Metric::TTC,
                                                              Metric::LK, Metric::HC, Metric::EC};

std::string_view metric_name(Metric m);
std::optional<Metric> metric_from_name(std::string_view name);

/// The nine sub-metric values for one trajectory in one stage, each in [0, 1].
struct SubScores {
  std::array<double, kMetricCount> values{1, 1, 1, 1, 1, 1, 1, 1, 1};

  double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  friend bool operator==(const SubScores&, const SubScores&) = default;
};

struct MetricWeights {
  std::set<Metric> penalty_set;
  std::map<Metric, double> weighted;

  /// Penalties {NC, DAC, DDC, TLC}; weighted {EP:5, TTC:5, LK:2, HC:1, EC:2}.
  static MetricWeights defaults();
};

/// Throws InvalidWeights.
void validate(const MetricWeights& weights);

/// Thresholds for every sub-metric in one place.
struct MetricConfig {
  double ego_length{4.6};
  double ego_width{1.9};
  // NC fault rules
  double stationary_speed{0.1};
  double rear_sector_deg{120.0};
  // Interpolated checks between samples for NC and DAC.
  int collision_substeps{4};
  double ddc_max_opposed_distance{2.0};
  double ttc_horizon{1.0};
  double lk_max_deviation{0.5};
  double lk_max_duration{1.0};
  double hc_max_lon_accel{4.0};
  double hc_max_lat_accel{4.9};
  double ec_max_jerk{8.0};
  double ec_max_yaw_rate{0.95};
  double ec_max_yaw_accel{1.9};
  // EP is 1 whenever the best compliant progress is below this.
  double ep_min_reference{0.1};
};

OrientedBox ego_footprint(const Pose2D& pose, const MetricConfig& cfg);
OrientedBox agent_footprint(const Agent& agent, const Pose2D& pose);

double score_nc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_dac(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_ddc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_tlc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_ttc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_lk(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_hc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});
double score_ec(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg = {});

/// Arc-length advance of the projection onto the route between first and last sample.
double route_progress(const Trajectory& traj, const Stage& stage);

/// clip(progress / reference, 0, 1); reference absent means the trajectory is its own reference.
double score_ep(const Trajectory& traj, const Stage& stage, std::optional<double> reference_progress,
                const MetricConfig& cfg = {});

/// Best progress among candidates with NC = DAC = 1, or nullopt when none qualifies.
std::optional<double> ep_reference(const std::vector<Trajectory>& candidates, const Stage& stage,
                                   const MetricConfig& cfg = {});

SubScores score_all(const Trajectory& traj, const Stage& stage, std::optional<double> reference_progress,
                    const MetricConfig& cfg = {});

/// Scores a whole candidate set, using the set itself as the EP reference.
std::vector<SubScores> score_candidates(const std::vector<Trajectory>& candidates, const Stage& stage,
                                        const MetricConfig& cfg = {});

/// (product of penalties) x (weighted mean of the weighted group).
double compose_epdms(const SubScores& scores, const MetricWeights& weights);

struct EpdmsResult {
  SubScores stage1;
  std::optional<SubScores> stage2;
  double epdms{0.0};
};

/// Per-scenario product of stage composites. traj2 must be present iff the scenario has stage2.
EpdmsResult evaluate_two_stage(const Trajectory& traj1, const std::optional<Trajectory>& traj2,
                               const Scenario& scenario, const MetricWeights& weights,
                               std::optional<double> ep_reference1 = std::nullopt,
                               std::optional<double> ep_reference2 = std::nullopt,
                               const MetricConfig& cfg = {});

/// Combines already-computed stage scores under the same product rule.
EpdmsResult combine_stages(const SubScores& stage1, const std::optional<SubScores>& stage2,
                           const MetricWeights& weights);

double fleet_mean(const std::vector<EpdmsResult>& results);

}  // namespace vsf
