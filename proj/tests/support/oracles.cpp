#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a <= -kPi) a += 2 * kPi;
  return a;
}

double cross2(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

std::vector<Vec2> clip(const std::array<Vec2, 4>& subject, const std::array<Vec2, 4>& clipper) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < 4 && !out.empty(); ++e) {
    const Vec2 a = clipper[e];
    const Vec2 b = clipper[(e + 1) % 4];
    std::vector<Vec2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2 p = in[i];
      const Vec2 q = in[(i + 1) % in.size()];
      const double sp = cross2(a, b, p);
      const double sq = cross2(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double f = sp / (sp - sq);
        out.push_back({p.x + f * (q.x - p.x), p.y + f * (q.y - p.y)});
      }
    }
  }
  return out;
}

double area_of(const std::vector<Vec2>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i];
    const Vec2 q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double f = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  f = std::clamp(f, 0.0, 1.0);
  return std::hypot(p.x - (a.x + f * dx), p.y - (a.y + f * dy));
}

double boundary_distance(Vec2 p, const std::vector<Vec2>& poly) {
  double d = 1e300;
  for (std::size_t i = 0; i < poly.size(); ++i) d = std::min(d, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return d;
}

std::array<Vec2, 4> corners_of(const vsf::TrajectorySample& s, double length, double width) {
  return rect_corners(s.pose.x, s.pose.y, s.pose.heading, length, width);
}

std::vector<double> fine_times(const vsf::Trajectory& traj, int per_step) {
  std::vector<double> out;
  const double t0 = traj.samples.front().t;
  const auto steps = static_cast<long>(traj.samples.size() - 1) * per_step;
  for (long i = 0; i <= steps; ++i) out.push_back(t0 + traj.dt * static_cast<double>(i) / per_step);
  return out;
}

vsf::LightState light_at(const vsf::TrafficLight& light, double t) {
  vsf::LightState s = light.state_timeline.front().state;
  for (const auto& ph : light.state_timeline) {
    if (t >= ph.t) s = ph.state;
  }
  return s;
}

}  // namespace

std::array<Vec2, 4> rect_corners(double cx, double cy, double heading, double length, double width) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double hl = length / 2;
  const double hw = width / 2;
  auto at = [&](double lx, double ly) { return Vec2{cx + lx * c - ly * s, cy + lx * s + ly * c}; };
  return {at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)};
}

double overlap_area(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  const auto poly = clip(a, b);
  return poly.size() < 3 ? 0.0 : std::abs(area_of(poly));
}

std::optional<Vec2> overlap_centroid(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  const auto poly = clip(a, b);
  if (poly.size() < 3) return std::nullopt;
  const double area = area_of(poly);
  if (std::abs(area) < 1e-14) return std::nullopt;
  double cx = 0;
  double cy = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i];
    const Vec2 q = poly[(i + 1) % poly.size()];
    const double w = p.x * q.y - q.x * p.y;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  return Vec2{cx / (6 * area), cy / (6 * area)};
}

int winding_number(Vec2 p, const std::vector<Vec2>& poly) {
  int wn = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    if (a.y <= p.y) {
      if (b.y > p.y && cross2(a, b, p) > 0) ++wn;
    } else if (b.y <= p.y && cross2(a, b, p) < 0) {
      --wn;
    }
  }
  return wn;
}

double unwrap_lerp(double a, double b, double f) {
  double bu = b;
  while (bu - a > kPi) bu -= 2 * kPi;
  while (bu - a < -kPi) bu += 2 * kPi;
  return wrap(a + f * (bu - a));
}

vsf::TrajectorySample interpolate(const std::vector<vsf::TrajectorySample>& track, double t) {
  if (t <= track.front().t) return track.front();
  if (t >= track.back().t) return track.back();
  std::size_t k = 0;
  while (track[k + 1].t < t) ++k;
  const auto& a = track[k];
  const auto& b = track[k + 1];
  const double f = (t - a.t) / (b.t - a.t);
  vsf::TrajectorySample s;
  s.t = t;
  s.pose.x = a.pose.x + f * (b.pose.x - a.pose.x);
  s.pose.y = a.pose.y + f * (b.pose.y - a.pose.y);
  s.pose.heading = unwrap_lerp(a.pose.heading, b.pose.heading, f);
  s.speed = a.speed + f * (b.speed - a.speed);
  return s;
}

MetricProbe brute_nc(const vsf::Trajectory& traj, const vsf::Stage& stage, int per_step, const vsf::MetricConfig& cfg) {
  MetricProbe probe;
  std::vector<bool> done(stage.agents.size(), false);
  const double rear_limit = kPi - 0.5 * cfg.rear_sector_deg * kPi / 180.0;
  for (double t : fine_times(traj, per_step)) {
    const auto ego = interpolate(traj.samples, t);
    const auto ego_box = corners_of(ego, cfg.ego_length, cfg.ego_width);
    for (std::size_t i = 0; i < stage.agents.size(); ++i) {
      if (done[i]) continue;
      const auto& agent = stage.agents[i];
      const auto other = corners_of(interpolate(agent.track, t), agent.length, agent.width);
      const double area = overlap_area(ego_box, other);
      if (area <= 0) continue;
      done[i] = true;
      probe.margin = std::min(probe.margin, area);
      if (ego.speed < cfg.stationary_speed) continue;
      const Vec2 c = *overlap_centroid(ego_box, other);
      const double bearing = wrap(std::atan2(c.y - ego.pose.y, c.x - ego.pose.x) - ego.pose.heading);
      const auto before = interpolate(traj.samples, t - traj.dt / 2);
      const auto after = interpolate(traj.samples, t + traj.dt / 2);
      const double along = (after.pose.x - before.pose.x) * std::cos(before.pose.heading) +
                           (after.pose.y - before.pose.y) * std::sin(before.pose.heading);
      const bool hit_from_behind = std::abs(bearing) >= rear_limit && along >= 0;
      if (hit_from_behind) continue;
      probe.value = 0.0;
      return probe;
    }
  }
  return probe;
}

MetricProbe brute_dac(const vsf::Trajectory& traj, const vsf::Stage& stage, int per_step, const vsf::MetricConfig& cfg) {
  MetricProbe probe;
  for (double t : fine_times(traj, per_step)) {
    const auto ego = interpolate(traj.samples, t);
    for (const Vec2 corner : corners_of(ego, cfg.ego_length, cfg.ego_width)) {
      bool inside = false;
      double clearance = 1e300;
      for (const auto& poly : stage.map.drivable) {
        inside = inside || winding_number(corner, poly) != 0;
        clearance = std::min(clearance, boundary_distance(corner, poly));
      }
      probe.margin = std::min(probe.margin, clearance);
      if (!inside) {
        probe.value = 0.0;
        return probe;
      }
    }
  }
  return probe;
}

MetricProbe brute_tlc(const vsf::Trajectory& traj, const vsf::Stage& stage, int per_step, const vsf::MetricConfig& cfg) {
  MetricProbe probe;
  auto bumper = [&](const vsf::TrajectorySample& s) {
    return Vec2{s.pose.x + 0.5 * cfg.ego_length * std::cos(s.pose.heading),
                s.pose.y + 0.5 * cfg.ego_length * std::sin(s.pose.heading)};
  };
  const auto times = fine_times(traj, per_step);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const Vec2 p = bumper(interpolate(traj.samples, times[i]));
    const Vec2 q = bumper(interpolate(traj.samples, times[i + 1]));
    for (const auto& light : stage.map.traffic_lights) {
      const Vec2 a = light.stop_line.a;
      const Vec2 b = light.stop_line.b;
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const double sp = cross2(a, b, p) / len;
      const double sq = cross2(a, b, q) / len;
      probe.margin = std::min(probe.margin, std::abs(sq));
      if ((sp > 0) == (sq > 0) || sp == sq) continue;
      const double f = sp / (sp - sq);
      const Vec2 x{p.x + f * (q.x - p.x), p.y + f * (q.y - p.y)};
      const double along = ((x.x - a.x) * (b.x - a.x) + (x.y - a.y) * (b.y - a.y)) / (len * len);
      if (along < 0 || along > 1) {
        probe.margin = std::min(probe.margin, std::min(std::abs(along), std::abs(along - 1)) * len);
        continue;
      }
      if (light_at(light, times[i] + f * (times[i + 1] - times[i])) == vsf::LightState::Red) {
        probe.value = 0.0;
        return probe;
      }
    }
  }
  return probe;
}

MetricProbe brute_ttc(const vsf::Trajectory& traj, const vsf::Stage& stage, double tau_step,
                      const vsf::MetricConfig& cfg) {
  MetricProbe probe;
  const auto steps = static_cast<int>(std::lround(cfg.ttc_horizon / tau_step));
  for (const auto& s : traj.samples) {
    const double ex = std::cos(s.pose.heading) * s.speed;
    const double ey = std::sin(s.pose.heading) * s.speed;
    for (const auto& agent : stage.agents) {
      const auto a = interpolate(agent.track, s.t);
      const double ax = std::cos(a.pose.heading) * a.speed;
      const double ay = std::sin(a.pose.heading) * a.speed;
      for (int k = 0; k <= steps; ++k) {
        const double tau = k * tau_step;
        const auto mine = rect_corners(s.pose.x + ex * tau, s.pose.y + ey * tau, s.pose.heading, cfg.ego_length,
                                       cfg.ego_width);
        const auto theirs = rect_corners(a.pose.x + ax * tau, a.pose.y + ay * tau, a.pose.heading, agent.length,
                                         agent.width);
        const double area = overlap_area(mine, theirs);
        if (area > 0) {
          probe.margin = std::min(probe.margin, area);
          probe.value = 0.0;
          return probe;
        }
      }
    }
  }
  return probe;
}

Vec2 arc_endpoint(double speed, double kappa, double t) {
  if (kappa == 0.0) return {speed * t, 0.0};
  const double phi = kappa * speed * t;
  return {std::sin(phi) / kappa, (1.0 - std::cos(phi)) / kappa};
}

double epdms_longhand(const vsf::SubScores& s) {
  using vsf::Metric;
  const double penalties = s[Metric::NC] * s[Metric::DAC] * s[Metric::DDC] * s[Metric::TLC];
  const double weighted = (5 * s[Metric::EP] + 5 * s[Metric::TTC] + 2 * s[Metric::LK] + 1 * s[Metric::HC] +
                           2 * s[Metric::EC]) /
                          15.0;
  return penalties * weighted;
}

vsf::Linearization finite_difference(const vsf::BicycleState& x, const vsf::Control& u, const vsf::LqrConfig& cfg,
                                     double h) {
  auto f = [&](const Eigen::Vector4d& xs, const Eigen::Vector2d& us) {
    const auto n = vsf::bicycle_step({xs(0), xs(1), xs(2), xs(3)}, {us(0), us(1)}, cfg);
    return Eigen::Vector4d(n.x, n.y, n.heading, n.speed);
  };
  const Eigen::Vector4d x0(x.x, x.y, x.heading, x.speed);
  const Eigen::Vector2d u0(u.accel, u.steer);
  vsf::Linearization out;
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector4d d = Eigen::Vector4d::Zero();
    d(j) = h;
    out.A.col(j) = (f(x0 + d, u0) - f(x0 - d, u0)) / (2 * h);
  }
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    d(j) = h;
    out.B.col(j) = (f(x0, u0 + d) - f(x0, u0 - d)) / (2 * h);
  }
  return out;
}

}  // namespace oracle
