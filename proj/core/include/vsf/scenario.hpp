#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsf/geometry.hpp"

namespace vsf {

inline constexpr double kDefaultHorizon = 4.0;
inline constexpr double kDefaultDt = 0.1;

struct Pose2D {
  double x{0.0};
  double y{0.0};
  double heading{0.0};  // radians, (-pi, pi]

  [[nodiscard]] Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct TrajectorySample {
  double t{0.0};
  Pose2D pose;
  double speed{0.0};
  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

/// Uniformly sampled pose/speed sequence. Sample count is horizon/dt + 1.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  double dt{kDefaultDt};

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] bool empty() const { return samples.empty(); }
  [[nodiscard]] double horizon() const {
    return samples.empty() ? 0.0 : samples.back().t - samples.front().t;
  }
  [[nodiscard]] const TrajectorySample& operator[](std::size_t i) const { return samples[i]; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class DrivingCommand { Left, Forward, Right };

struct EgoState {
  Pose2D pose;
  double speed{0.0};
  double accel{0.0};
  DrivingCommand command{DrivingCommand::Forward};
  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct Agent {
  std::string id;
  double length{4.5};
  double width{1.9};
  std::vector<TrajectorySample> track;

  /// Pose and speed at time t, linearly interpolated and held at the ends.
  [[nodiscard]] TrajectorySample state_at(double t) const;
  friend bool operator==(const Agent&, const Agent&) = default;
};

struct Lane {
  Polyline centerline;
  std::vector<double> direction;  // heading per centerline segment
  double half_width{1.75};
  friend bool operator==(const Lane&, const Lane&) = default;
};

enum class LightState { Red, Yellow, Green };

struct LightPhase {
  double t{0.0};
  LightState state{LightState::Green};
  friend bool operator==(const LightPhase&, const LightPhase&) = default;
};

struct TrafficLight {
  Segment stop_line;
  std::vector<LightPhase> state_timeline;  // piecewise constant from each phase start

  [[nodiscard]] LightState state_at(double t) const;
  friend bool operator==(const TrafficLight&, const TrafficLight&) = default;
};

struct MapContext {
  std::vector<Polygon> drivable;
  std::vector<Lane> lanes;
  std::vector<TrafficLight> traffic_lights;
  Polyline route;
  friend bool operator==(const MapContext&, const MapContext&) = default;
};

struct CameraExtrinsic {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double yaw{0.0};
  double pitch{0.0};
  double roll{0.0};
  friend bool operator==(const CameraExtrinsic&, const CameraExtrinsic&) = default;
};

struct CameraModel {
  double fx{250.0};
  double fy{250.0};
  double cx{160.0};
  double cy{120.0};
  int width{320};
  int height{240};
  CameraExtrinsic extrinsic{1.5, 0.0, 1.5, 0.0, 0.0, 0.0};
  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct StageOverride {
  EgoState ego;
  std::vector<Agent> agents;
  MapContext map;
  std::optional<Trajectory> ego_history;
  friend bool operator==(const StageOverride&, const StageOverride&) = default;
};

struct Scenario {
  std::string id;
  EgoState ego;
  Trajectory ego_history;
  std::vector<Agent> agents;
  MapContext map;
  CameraModel camera;
  std::optional<StageOverride> stage2;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Everything a metric or scorer sees for one evaluation stage.
struct Stage {
  EgoState ego;
  Trajectory ego_history;
  std::vector<Agent> agents;
  MapContext map;
  CameraModel camera;
};

enum class StageIndex { First = 1, Second = 2 };

/// Materialises stage 1 or the stage-2 overrides. Without an explicit stage-2
/// history, a constant-speed history is backfilled from the stage-2 ego.
Stage make_stage(const Scenario& scenario, StageIndex index);

/// Constant-speed straight history ending at the ego pose at t = 0.
Trajectory backfill_history(const EgoState& ego, double duration, double dt);

/// Throws InvariantViolation naming `what` and the field.
void validate_trajectory(const Trajectory& traj, const std::string& what);
void validate_scenario(const Scenario& scenario);

/// Linear in x, y, speed; shortest-arc in heading. Horizon must be a multiple of dt_new.
Trajectory resample_trajectory(const Trajectory& traj, double dt_new);

/// Interpolates a trajectory at time t (clamped to its span).
TrajectorySample sample_at(std::span<const TrajectorySample> samples, double t);

std::string_view to_string(DrivingCommand c);
std::string_view to_string(LightState s);

}  // namespace vsf
