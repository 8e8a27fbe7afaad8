#include "vsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vsf/error.hpp"
#include "vsf/kinematics.hpp"

namespace vsf {

namespace {

constexpr double kTol = 1e-9;

// Sample times for interpolated checks: every sample plus substeps between them.
std::vector<double> check_times(const Trajectory& traj, int substeps) {
  std::vector<double> out;
  const int sub = std::max(1, substeps);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    for (int j = 0; j < sub; ++j) out.push_back(traj[k].t + traj.dt * j / sub);
  }
  if (!traj.empty()) out.push_back(traj.samples.back().t);
  return out;
}

bool inside_drivable(Vec2 p, const MapContext& map) {
  return std::any_of(map.drivable.begin(), map.drivable.end(),
                     [&](const Polygon& poly) { return point_in_polygon(p, poly); });
}

struct LaneMatch {
  const Lane* lane{nullptr};
  PolylineProjection proj;
};

LaneMatch nearest_lane(Vec2 p, const MapContext& map) {
  LaneMatch best;
  best.proj.distance = std::numeric_limits<double>::infinity();
  for (const auto& lane : map.lanes) {
    auto proj = project_onto_polyline(p, lane.centerline);
    if (proj.distance < best.proj.distance) {
      best.lane = &lane;
      best.proj = proj;
    }
  }
  return best;
}

void require_lanes(const Stage& stage, const char* metric) {
  if (stage.map.lanes.empty()) throw Error(ErrorCode::MissingMapData, std::string(metric) + " needs lanes");
}

// Motion direction opposes heading.
bool reversing_at(const Trajectory& traj, double t) {
  const auto a = sample_at(traj.samples, t - 0.5 * traj.dt);
  const auto b = sample_at(traj.samples, t + 0.5 * traj.dt);
  return dot(b.pose.position() - a.pose.position(), unit_from_heading(a.pose.heading)) < 0.0;
}

bool comfortable(const MotionProfile& m, const MetricConfig& cfg) {
  for (double a : m.lon_accel) {
    if (std::abs(a) > cfg.hc_max_lon_accel + kTol) return false;
  }
  for (double a : m.lat_accel) {
    if (std::abs(a) > cfg.hc_max_lat_accel + kTol) return false;
  }
  return true;
}

}  // namespace

std::string_view metric_name(Metric m) {
  static constexpr std::array<std::string_view, kMetricCount> names{"nc", "dac", "ddc", "tlc", "ep",
                                                                   "ttc", "lk", "hc", "ec"};
  return names[static_cast<std::size_t>(m)];
}

std::optional<Metric> metric_from_name(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  return std::nullopt;
}

MetricWeights MetricWeights::defaults() {
  MetricWeights w;
  w.penalty_set = {Metric::NC, Metric::DAC, Metric::DDC, Metric::TLC};
  w.weighted = {{Metric::EP, 5.0}, {Metric::TTC, 5.0}, {Metric::LK, 2.0}, {Metric::HC, 1.0}, {Metric::EC, 2.0}};
  return w;
}

void validate(const MetricWeights& weights) {
  double total = 0.0;
  for (const auto& [m, w] : weights.weighted) {
    if (weights.penalty_set.count(m)) {
      throw Error(ErrorCode::InvalidWeights, std::string(metric_name(m)) + " is both penalty and weighted");
    }
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidWeights, std::string(metric_name(m)) + " weight must be >= 0");
    }
    total += w;
  }
  if (weights.penalty_set.size() + weights.weighted.size() != kMetricCount) {
    throw Error(ErrorCode::InvalidWeights, "penalty and weighted sets must cover all nine metrics");
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidWeights, "weights must sum to > 0");
}

OrientedBox ego_footprint(const Pose2D& pose, const MetricConfig& cfg) {
  return {pose.position(), pose.heading, cfg.ego_length, cfg.ego_width};
}

OrientedBox agent_footprint(const Agent& agent, const Pose2D& pose) {
  return {pose.position(), pose.heading, agent.length, agent.width};
}

double score_nc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  if (stage.agents.empty()) return 1.0;
  const double rear_half = 0.5 * cfg.rear_sector_deg * std::numbers::pi / 180.0;
  std::vector<bool> resolved(stage.agents.size(), false);
  for (double t : check_times(traj, cfg.collision_substeps)) {
    const auto ego = sample_at(traj.samples, t);
    const OrientedBox ego_box = ego_footprint(ego.pose, cfg);
    for (std::size_t i = 0; i < stage.agents.size(); ++i) {
      if (resolved[i]) continue;
      const auto& agent = stage.agents[i];
      const OrientedBox box = agent_footprint(agent, agent.state_at(t).pose);
      if (!boxes_overlap(ego_box, box)) continue;
      // First contact with an agent decides fault for that agent.
      resolved[i] = true;
      if (ego.speed < cfg.stationary_speed) continue;
      const Vec2 c = contact_point(ego_box, box) - ego_box.center;
      const double bearing = normalize_angle(std::atan2(c.y, c.x) - ego.pose.heading);
      if (std::abs(bearing) >= std::numbers::pi - rear_half && !reversing_at(traj, t)) continue;
      return 0.0;
    }
  }
  return 1.0;
}

double score_dac(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  if (stage.map.drivable.empty()) throw Error(ErrorCode::MissingMapData, "DAC needs drivable polygons");
  for (double t : check_times(traj, cfg.collision_substeps)) {
    const auto s = sample_at(traj.samples, t);
    for (const Vec2 corner : ego_footprint(s.pose, cfg).corners()) {
      if (!inside_drivable(corner, stage.map)) return 0.0;
    }
  }
  return 1.0;
}

double score_ddc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  require_lanes(stage, "DDC");
  double opposed = 0.0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const Vec2 p = traj[k].pose.position();
    const auto match = nearest_lane(p, stage.map);
    const double lane_dir = match.lane->direction[match.proj.segment];
    if (std::abs(normalize_angle(traj[k].pose.heading - lane_dir)) > std::numbers::pi / 2) {
      opposed += norm(traj[k + 1].pose.position() - p);
    }
  }
  return opposed < cfg.ddc_max_opposed_distance ? 1.0 : 0.0;
}

double score_tlc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  if (stage.map.traffic_lights.empty()) return 1.0;
  auto front = [&](const TrajectorySample& s) {
    return s.pose.position() + unit_from_heading(s.pose.heading) * (0.5 * cfg.ego_length);
  };
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const Vec2 a = front(traj[k]);
    const Vec2 b = front(traj[k + 1]);
    for (const auto& light : stage.map.traffic_lights) {
      const auto s = segment_intersection(a, b, light.stop_line.a, light.stop_line.b);
      if (!s) continue;
      const double t_cross = traj[k].t + *s * traj.dt;
      if (light.state_at(t_cross) == LightState::Red) return 0.0;
    }
  }
  return 1.0;
}

double score_ttc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  if (stage.agents.empty()) return 1.0;
  for (const auto& s : traj.samples) {
    const OrientedBox ego_box = ego_footprint(s.pose, cfg);
    const Vec2 ego_vel = unit_from_heading(s.pose.heading) * s.speed;
    for (const auto& agent : stage.agents) {
      const auto a = agent.state_at(s.t);
      const Vec2 vel = unit_from_heading(a.pose.heading) * a.speed;
      if (first_overlap_time(ego_box, ego_vel, agent_footprint(agent, a.pose), vel, cfg.ttc_horizon)) {
        return 0.0;
      }
    }
  }
  return 1.0;
}

double score_lk(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  require_lanes(stage, "LK");
  int run = 0;
  for (const auto& s : traj.samples) {
    const auto match = nearest_lane(s.pose.position(), stage.map);
    if (match.proj.distance > cfg.lk_max_deviation) {
      ++run;
      // A run of n samples spans (n - 1) * dt seconds.
      if ((run - 1) * traj.dt > cfg.lk_max_duration + kTol) return 0.0;
    } else {
      run = 0;
    }
  }
  return 1.0;
}

double score_hc(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  const auto series = prefix_with_history(stage.ego_history, traj);
  return comfortable(motion_profile(series, traj.dt), cfg) ? 1.0 : 0.0;
}

double score_ec(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  const auto series = prefix_with_history(stage.ego_history, traj);
  const auto m = motion_profile(series, traj.dt);
  if (!comfortable(m, cfg)) return 0.0;
  auto within = [](const std::vector<double>& v, double bound) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return std::abs(x) <= bound + kTol; });
  };
  const bool ok = within(m.jerk, cfg.ec_max_jerk) && within(m.yaw_rate, cfg.ec_max_yaw_rate) &&
                  within(m.yaw_accel, cfg.ec_max_yaw_accel);
  return ok ? 1.0 : 0.0;
}

double route_progress(const Trajectory& traj, const Stage& stage) {
  if (stage.map.route.size() < 2) throw Error(ErrorCode::MissingMapData, "EP needs a route");
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "EP of empty trajectory");
  const auto start = project_onto_polyline(traj.samples.front().pose.position(), stage.map.route);
  const auto end = project_onto_polyline(traj.samples.back().pose.position(), stage.map.route);
  return end.arc_length - start.arc_length;
}

double score_ep(const Trajectory& traj, const Stage& stage, std::optional<double> reference_progress,
                const MetricConfig& cfg) {
  const double progress = route_progress(traj, stage);
  if (!reference_progress || *reference_progress < cfg.ep_min_reference) return 1.0;
  return std::clamp(progress / *reference_progress, 0.0, 1.0);
}

std::optional<double> ep_reference(const std::vector<Trajectory>& candidates, const Stage& stage,
                                   const MetricConfig& cfg) {
  std::optional<double> best;
  for (const auto& c : candidates) {
    if (score_nc(c, stage, cfg) < 1.0 || score_dac(c, stage, cfg) < 1.0) continue;
    const double p = route_progress(c, stage);
    if (!best || p > *best) best = p;
  }
  return best;
}

SubScores score_all(const Trajectory& traj, const Stage& stage, std::optional<double> reference_progress,
                    const MetricConfig& cfg) {
  SubScores s;
  s[Metric::NC] = score_nc(traj, stage, cfg);
  s[Metric::DAC] = score_dac(traj, stage, cfg);
  s[Metric::DDC] = score_ddc(traj, stage, cfg);
  s[Metric::TLC] = score_tlc(traj, stage, cfg);
  s[Metric::EP] = score_ep(traj, stage, reference_progress, cfg);
  s[Metric::TTC] = score_ttc(traj, stage, cfg);
  s[Metric::LK] = score_lk(traj, stage, cfg);
  s[Metric::HC] = score_hc(traj, stage, cfg);
  s[Metric::EC] = s[Metric::HC] > 0.0 ? score_ec(traj, stage, cfg) : 0.0;
  return s;
}

std::vector<SubScores> score_candidates(const std::vector<Trajectory>& candidates, const Stage& stage,
                                        const MetricConfig& cfg) {
  std::vector<SubScores> out;
  out.reserve(candidates.size());
  std::vector<double> progress;
  progress.reserve(candidates.size());
  std::optional<double> reference;
  for (const auto& c : candidates) {
    SubScores s = score_all(c, stage, std::nullopt, cfg);
    const double p = route_progress(c, stage);
    if (s[Metric::NC] == 1.0 && s[Metric::DAC] == 1.0 && (!reference || p > *reference)) reference = p;
    progress.push_back(p);
    out.push_back(s);
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (reference && *reference >= cfg.ep_min_reference) {
      out[i][Metric::EP] = std::clamp(progress[i] / *reference, 0.0, 1.0);
    } else {
      out[i][Metric::EP] = 1.0;
    }
  }
  return out;
}

double compose_epdms(const SubScores& scores, const MetricWeights& weights) {
  validate(weights);
  double penalty = 1.0;
  for (Metric m : weights.penalty_set) penalty *= scores[m];
  double num = 0.0;
  double den = 0.0;
  for (const auto& [m, w] : weights.weighted) {
    num += w * scores[m];
    den += w;
  }
  return std::clamp(penalty * (num / den), 0.0, 1.0);
}

EpdmsResult combine_stages(const SubScores& stage1, const std::optional<SubScores>& stage2,
                           const MetricWeights& weights) {
  EpdmsResult r;
  r.stage1 = stage1;
  r.stage2 = stage2;
  r.epdms = compose_epdms(stage1, weights);
  if (stage2) r.epdms *= compose_epdms(*stage2, weights);
  return r;
}

EpdmsResult evaluate_two_stage(const Trajectory& traj1, const std::optional<Trajectory>& traj2,
                               const Scenario& scenario, const MetricWeights& weights,
                               std::optional<double> ep_reference1, std::optional<double> ep_reference2,
                               const MetricConfig& cfg) {
  if (traj2.has_value() != scenario.stage2.has_value()) {
    throw Error(ErrorCode::StageMismatch, "scenario " + scenario.id + ": stage-2 trajectory presence mismatch");
  }
  const SubScores s1 = score_all(traj1, make_stage(scenario, StageIndex::First), ep_reference1, cfg);
  std::optional<SubScores> s2;
  if (traj2) s2 = score_all(*traj2, make_stage(scenario, StageIndex::Second), ep_reference2, cfg);
  return combine_stages(s1, s2, weights);
}

double fleet_mean(const std::vector<EpdmsResult>& results) {
  if (results.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : results) acc += r.epdms;
  return acc / static_cast<double>(results.size());
}

}  // namespace vsf
