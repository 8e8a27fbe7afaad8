#pragma once

#include <span>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

/// Curvature of the circular arc joining two poses: 2 sin(dtheta/2) / chord.
/// Exact for constant-curvature steps; zero for degenerate chords.
double segment_curvature(const Pose2D& a, const Pose2D& b);

/// Per-step curvature of a trajectory (size - 1 entries).
std::vector<double> step_curvatures(std::span<const TrajectorySample> samples);

double max_abs_curvature(std::span<const TrajectorySample> samples);

double arc_length(std::span<const TrajectorySample> samples);

/// Finite-difference derivatives on a uniformly sampled sequence.
struct MotionProfile {
  std::vector<double> lon_accel;  // (v[k+1]-v[k])/dt
  std::vector<double> lat_accel;  // v[k] * yaw_rate[k]
  std::vector<double> jerk;       // diff of lon_accel
  std::vector<double> yaw_rate;   // wrap(theta[k+1]-theta[k])/dt
  std::vector<double> yaw_accel;  // diff of yaw_rate
};

MotionProfile motion_profile(std::span<const TrajectorySample> samples, double dt);

/// History samples strictly before the plan start, followed by the plan.
std::vector<TrajectorySample> prefix_with_history(const Trajectory& history, const Trajectory& plan);

}  // namespace vsf
