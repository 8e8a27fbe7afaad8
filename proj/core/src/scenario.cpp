#include "vsf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsf/error.hpp"

namespace vsf {

namespace {

constexpr double kTimeTol = 1e-6;

[[noreturn]] void violation(const std::string& what, const std::string& field, const std::string& detail) {
  throw Error(ErrorCode::InvariantViolation, what + ": " + field + " " + detail);
}

bool finite_pose(const Pose2D& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.heading);
}

void validate_pose(const Pose2D& p, const std::string& what, const std::string& field) {
  if (!finite_pose(p)) violation(what, field, "has non-finite values");
  if (!(p.heading > -std::numbers::pi - 1e-12 && p.heading <= std::numbers::pi + 1e-12)) {
    violation(what, field + ".heading", "outside (-pi, pi]");
  }
}

void validate_track(const std::vector<TrajectorySample>& track, const std::string& what,
                    const std::string& field) {
  for (std::size_t i = 0; i < track.size(); ++i) {
    validate_pose(track[i].pose, what, field + "[" + std::to_string(i) + "].pose");
    if (!(track[i].speed >= 0.0) || !std::isfinite(track[i].speed)) {
      violation(what, field + "[" + std::to_string(i) + "].speed", "must be finite and >= 0");
    }
    if (i > 0 && !(track[i].t > track[i - 1].t)) {
      violation(what, field + "[" + std::to_string(i) + "].t", "timestamps not strictly increasing");
    }
  }
}

void validate_ego(const EgoState& ego, const std::string& what, const std::string& field) {
  validate_pose(ego.pose, what, field + ".pose");
  if (!(ego.speed >= 0.0) || !std::isfinite(ego.speed)) violation(what, field + ".speed", "must be >= 0");
  if (!std::isfinite(ego.accel)) violation(what, field + ".accel", "must be finite");
}

void validate_agents(const std::vector<Agent>& agents, const std::string& what, const std::string& field) {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!(a.length > 0.0) || !(a.width > 0.0)) violation(what, f + ".length/width", "must be > 0");
    if (a.track.empty()) violation(what, f + ".track", "is empty");
    validate_track(a.track, what, f + ".track");
  }
}

void validate_map(const MapContext& map, const std::string& what, const std::string& field) {
  for (std::size_t i = 0; i < map.drivable.size(); ++i) {
    if (!polygon_is_simple(map.drivable[i])) {
      violation(what, field + ".drivable[" + std::to_string(i) + "]", "is not a simple polygon");
    }
  }
  for (std::size_t i = 0; i < map.lanes.size(); ++i) {
    const auto& lane = map.lanes[i];
    const std::string f = field + ".lanes[" + std::to_string(i) + "]";
    if (lane.centerline.size() < 2) violation(what, f + ".centerline", "needs >= 2 points");
    if (lane.direction.size() + 1 != lane.centerline.size()) {
      violation(what, f + ".direction", "needs one heading per centerline segment");
    }
    if (!(lane.half_width > 0.0)) violation(what, f + ".half_width", "must be > 0");
  }
  for (std::size_t i = 0; i < map.traffic_lights.size(); ++i) {
    const auto& tl = map.traffic_lights[i];
    const std::string f = field + ".traffic_lights[" + std::to_string(i) + "]";
    if (tl.state_timeline.empty()) violation(what, f + ".state_timeline", "is empty");
    for (std::size_t k = 1; k < tl.state_timeline.size(); ++k) {
      if (!(tl.state_timeline[k].t > tl.state_timeline[k - 1].t)) {
        violation(what, f + ".state_timeline", "timestamps not strictly increasing");
      }
    }
  }
  if (map.route.size() < 2) violation(what, field + ".route", "needs >= 2 points");
}

}  // namespace

TrajectorySample sample_at(std::span<const TrajectorySample> samples, double t) {
  if (samples.empty()) throw Error(ErrorCode::EmptyTrajectory, "cannot interpolate an empty track");
  if (t <= samples.front().t) return samples.front();
  if (t >= samples.back().t) return samples.back();
  const auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                   [](double v, const TrajectorySample& s) { return v < s.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double f = (t - a.t) / (b.t - a.t);
  TrajectorySample out;
  out.t = t;
  out.pose.x = a.pose.x + f * (b.pose.x - a.pose.x);
  out.pose.y = a.pose.y + f * (b.pose.y - a.pose.y);
  out.pose.heading = normalize_angle(a.pose.heading + f * normalize_angle(b.pose.heading - a.pose.heading));
  out.speed = a.speed + f * (b.speed - a.speed);
  return out;
}

TrajectorySample Agent::state_at(double t) const { return sample_at(track, t); }

LightState TrafficLight::state_at(double t) const {
  LightState s = state_timeline.front().state;
  for (const auto& phase : state_timeline) {
    if (phase.t <= t) s = phase.state;
    else break;
  }
  return s;
}

Trajectory backfill_history(const EgoState& ego, double duration, double dt) {
  Trajectory h;
  h.dt = dt;
  const auto steps = static_cast<int>(std::lround(duration / dt));
  const Vec2 dir = unit_from_heading(ego.pose.heading);
  for (int k = -steps; k <= 0; ++k) {
    const double t = k * dt;
    const Vec2 p = ego.pose.position() + dir * (ego.speed * t);
    h.samples.push_back({t, {p.x, p.y, ego.pose.heading}, ego.speed});
  }
  return h;
}

Stage make_stage(const Scenario& scenario, StageIndex index) {
  if (index == StageIndex::First) {
    return {scenario.ego, scenario.ego_history, scenario.agents, scenario.map, scenario.camera};
  }
  if (!scenario.stage2) {
    throw Error(ErrorCode::StageMismatch, "scenario " + scenario.id + " has no stage2");
  }
  const auto& s2 = *scenario.stage2;
  const double dt = scenario.ego_history.dt;
  Trajectory history = s2.ego_history ? *s2.ego_history
                                      : backfill_history(s2.ego, scenario.ego_history.horizon(), dt);
  return {s2.ego, std::move(history), s2.agents, s2.map, scenario.camera};
}

void validate_trajectory(const Trajectory& traj, const std::string& what) {
  if (traj.samples.empty()) throw Error(ErrorCode::EmptyTrajectory, what + ": trajectory has no samples");
  if (!(traj.dt > 0.0)) violation(what, "dt", "must be > 0");
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const auto& s = traj.samples[i];
    validate_pose(s.pose, what, "samples[" + std::to_string(i) + "].pose");
    if (!(s.speed >= 0.0) || !std::isfinite(s.speed)) {
      violation(what, "samples[" + std::to_string(i) + "].speed", "must be finite and >= 0");
    }
    if (i > 0 && std::abs(s.t - traj.samples[i - 1].t - traj.dt) > kTimeTol) {
      violation(what, "samples[" + std::to_string(i) + "].t", "spacing differs from dt");
    }
  }
}

void validate_scenario(const Scenario& sc) {
  const std::string what = "scenario '" + sc.id + "'";
  if (sc.id.empty()) violation(what, "id", "is empty");
  validate_ego(sc.ego, what, "ego");
  validate_trajectory(sc.ego_history, what + " ego_history");
  validate_agents(sc.agents, what, "agents");
  validate_map(sc.map, what, "map");
  const auto& cam = sc.camera;
  if (!(cam.fx > 0.0 && cam.fy > 0.0)) violation(what, "camera.fx/fy", "must be > 0");
  if (!(cam.cx > 0.0 && cam.cx < cam.width)) violation(what, "camera.cx", "must lie in (0, width)");
  if (!(cam.cy > 0.0 && cam.cy < cam.height)) violation(what, "camera.cy", "must lie in (0, height)");
  if (sc.stage2) {
    validate_ego(sc.stage2->ego, what, "stage2.ego");
    validate_agents(sc.stage2->agents, what, "stage2.agents");
    validate_map(sc.stage2->map, what, "stage2.map");
    if (sc.stage2->ego_history) validate_trajectory(*sc.stage2->ego_history, what + " stage2.ego_history");
  }
}

Trajectory resample_trajectory(const Trajectory& traj, double dt_new) {
  if (traj.samples.empty()) throw Error(ErrorCode::EmptyTrajectory, "resample of empty trajectory");
  if (!(dt_new > 0.0)) throw Error(ErrorCode::InvalidParams, "dt_new must be > 0");
  const double horizon = traj.horizon();
  const double steps_f = horizon / dt_new;
  const auto steps = static_cast<long>(std::llround(steps_f));
  if (std::abs(steps_f - static_cast<double>(steps)) > 1e-6) {
    throw Error(ErrorCode::InvalidParams, "horizon is not a multiple of dt_new");
  }
  if (std::abs(dt_new - traj.dt) <= 1e-12) return traj;

  Trajectory out;
  out.dt = dt_new;
  out.samples.reserve(static_cast<std::size_t>(steps) + 1);
  const double t0 = traj.samples.front().t;
  for (long k = 0; k <= steps; ++k) {
    if (k == steps) {
      out.samples.push_back(traj.samples.back());
      break;
    }
    out.samples.push_back(sample_at(traj.samples, t0 + static_cast<double>(k) * dt_new));
  }
  return out;
}

std::string_view to_string(DrivingCommand c) {
  switch (c) {
    case DrivingCommand::Left: return "left";
    case DrivingCommand::Forward: return "forward";
    case DrivingCommand::Right: return "right";
  }
  return "forward";
}

std::string_view to_string(LightState s) {
  switch (s) {
    case LightState::Red: return "red";
    case LightState::Yellow: return "yellow";
    case LightState::Green: return "green";
  }
  return "green";
}

}  // namespace vsf
