#include "vsf/kinematics.hpp"

#include <algorithm>
#include <cmath>

namespace vsf {

double segment_curvature(const Pose2D& a, const Pose2D& b) {
  const double chord = norm(b.position() - a.position());
  if (chord < 1e-9) return 0.0;
  const double dtheta = normalize_angle(b.heading - a.heading);
  return 2.0 * std::sin(0.5 * dtheta) / chord;
}

std::vector<double> step_curvatures(std::span<const TrajectorySample> samples) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    out.push_back(segment_curvature(samples[i].pose, samples[i + 1].pose));
  }
  return out;
}

double max_abs_curvature(std::span<const TrajectorySample> samples) {
  double m = 0.0;
  for (double k : step_curvatures(samples)) m = std::max(m, std::abs(k));
  return m;
}

double arc_length(std::span<const TrajectorySample> samples) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    total += norm(samples[i + 1].pose.position() - samples[i].pose.position());
  }
  return total;
}

MotionProfile motion_profile(std::span<const TrajectorySample> samples, double dt) {
  MotionProfile m;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double a = (samples[i + 1].speed - samples[i].speed) / dt;
    const double yr = normalize_angle(samples[i + 1].pose.heading - samples[i].pose.heading) / dt;
    m.lon_accel.push_back(a);
    m.yaw_rate.push_back(yr);
    m.lat_accel.push_back(samples[i].speed * yr);
  }
  for (std::size_t i = 0; i + 1 < m.lon_accel.size(); ++i) {
    m.jerk.push_back((m.lon_accel[i + 1] - m.lon_accel[i]) / dt);
    m.yaw_accel.push_back((m.yaw_rate[i + 1] - m.yaw_rate[i]) / dt);
  }
  return m;
}

std::vector<TrajectorySample> prefix_with_history(const Trajectory& history, const Trajectory& plan) {
  std::vector<TrajectorySample> out;
  if (!plan.samples.empty()) {
    const double t0 = plan.samples.front().t;
    for (const auto& s : history.samples) {
      if (s.t < t0 - 1e-9) out.push_back(s);
    }
  }
  out.insert(out.end(), plan.samples.begin(), plan.samples.end());
  return out;
}

}  // namespace vsf
