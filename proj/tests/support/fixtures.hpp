#pragma once

// Hand-built stages and trajectories shared by the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vsf/scenario.hpp"

namespace fixture {

using namespace vsf;

/// Closed-form constant-acceleration motion along a fixed heading; speed stops at zero.
inline Trajectory straight(double x0, double y0, double heading, double v0, double accel = 0.0,
                           double horizon = kDefaultHorizon, double dt = kDefaultDt) {
  Trajectory traj;
  traj.dt = dt;
  const auto steps = static_cast<int>(std::lround(horizon / dt));
  const double t_stop = accel < 0 ? -v0 / accel : 1e300;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const double te = std::min(t, t_stop);
    const double s = v0 * te + 0.5 * accel * te * te;
    const double v = std::max(0.0, v0 + accel * te);
    traj.samples.push_back({t, {x0 + s * std::cos(heading), y0 + s * std::sin(heading), heading}, v});
  }
  return traj;
}

/// Constant-velocity agent track covering [0, horizon].
inline Agent moving_agent(std::string id, double x, double y, double heading, double speed, double length = 4.5,
                          double width = 1.9, double horizon = kDefaultHorizon) {
  Agent a;
  a.id = std::move(id);
  a.length = length;
  a.width = width;
  a.track = straight(x, y, heading, speed, 0.0, horizon).samples;
  return a;
}

inline Polygon rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

inline Lane straight_lane(double y, double x0 = -50.0, double x1 = 200.0, double heading = 0.0) {
  Lane lane;
  if (heading == 0.0) {
    lane.centerline = {{x0, y}, {x1, y}};
  } else {
    lane.centerline = {{x1, y}, {x0, y}};
  }
  lane.direction = {heading};
  return lane;
}

/// One lane along +x at y = 0 inside a 10 m wide corridor, ego at the origin.
inline Stage open_road(double speed = 10.0) {
  Stage st;
  st.ego.pose = {0, 0, 0};
  st.ego.speed = speed;
  st.ego_history = straight(-speed * 1.0, 0, 0, speed, 0.0, 1.0);
  for (auto& s : st.ego_history.samples) s.t -= 1.0;
  st.map.drivable = {rect(-50, -5, 200, 5)};
  st.map.lanes = {straight_lane(0.0)};
  st.map.route = {{-50, 0}, {200, 0}};
  return st;
}

inline Scenario scenario_from(const Stage& st, std::string id) {
  Scenario sc;
  sc.id = std::move(id);
  sc.ego = st.ego;
  sc.ego_history = st.ego_history;
  sc.agents = st.agents;
  sc.map = st.map;
  sc.camera = st.camera;
  return sc;
}

/// Small random stage for metric oracle checks: up to three agents, up to two drivable polygons
/// and an optional light, with an ego plan drawn from a random constant-curvature profile.
struct RandomCase {
  Stage stage;
  Trajectory plan;
};

inline Trajectory arc_plan(double v0, double accel, double kappa, double horizon = kDefaultHorizon,
                           double dt = kDefaultDt) {
  Trajectory traj;
  traj.dt = dt;
  const auto steps = static_cast<int>(std::lround(horizon / dt));
  double x = 0, y = 0, h = 0, v = v0;
  traj.samples.push_back({0, {0, 0, 0}, v0});
  // Fine Euler integration is plenty for a test fixture; only the sampled poses matter.
  const int sub = 50;
  for (int k = 1; k <= steps; ++k) {
    for (int j = 0; j < sub; ++j) {
      const double d = dt / sub;
      const double vn = std::max(0.0, v + accel * d);
      const double ds = 0.5 * (v + vn) * d;
      x += ds * std::cos(h + 0.5 * kappa * ds);
      y += ds * std::sin(h + 0.5 * kappa * ds);
      h += kappa * ds;
      v = vn;
    }
    traj.samples.push_back({k * dt, {x, y, normalize_angle(h)}, v});
  }
  return traj;
}

inline RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  RandomCase c;
  const double v0 = range(0.0, 14.0);
  c.plan = arc_plan(v0, range(-4.0, 2.0), range(-0.12, 0.12));
  Stage& st = c.stage;
  st.ego.speed = v0;
  st.ego_history = straight(-v0, 0, 0, v0, 0.0, 1.0);
  for (auto& s : st.ego_history.samples) s.t -= 1.0;

  const int polys = 1 + static_cast<int>(u(rng) * 2);
  for (int i = 0; i < polys; ++i) {
    const double x0 = range(-20, 5);
    const double y0 = range(-8, -1.5);
    st.map.drivable.push_back(rect(x0, y0, x0 + range(20, 70), y0 + range(3, 16)));
  }
  st.map.lanes = {straight_lane(0.0)};
  st.map.route = {{-50, 0}, {200, 0}};

  const int agents = static_cast<int>(u(rng) * 4);
  for (int i = 0; i < agents; ++i) {
    const double heading = range(-std::numbers::pi, std::numbers::pi);
    st.agents.push_back(moving_agent("a" + std::to_string(i), range(-5, 45), range(-12, 12), heading, range(0, 12),
                                     range(3.5, 5.5), range(1.6, 2.2)));
  }
  if (u(rng) < 0.5) {
    TrafficLight light;
    const double x = range(5, 40);
    const double half = range(2, 10);
    const double tilt = range(-0.3, 0.3);
    light.stop_line = {{x - half * std::sin(tilt), -half * std::cos(tilt)}, {x + half * std::sin(tilt), half * std::cos(tilt)}};
    const double t_switch = range(0, 4);
    light.state_timeline = {{0.0, u(rng) < 0.5 ? LightState::Red : LightState::Green},
                            {t_switch, u(rng) < 0.5 ? LightState::Red : LightState::Green}};
    st.map.traffic_lights.push_back(light);
  }
  return c;
}

}  // namespace fixture
