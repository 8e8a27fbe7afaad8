#include "vsf/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vsf/error.hpp"
#include "vsf/kinematics.hpp"

namespace vsf {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  out.back() = hi;  // the formula can overshoot hi by an ulp
  return out;
}

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

double speed_at(double v0, double a, double t, double v_max) { return std::clamp(v0 + a * t, 0.0, v_max); }

Trajectory rollout(const EgoState& ego, double kappa1, double accel, double kappa2, double switch_time,
                   const VocabularyParams& p) {
  const auto steps = static_cast<int>(std::lround(p.horizon / p.dt));
  Trajectory traj;
  traj.dt = p.dt;
  traj.samples.reserve(static_cast<std::size_t>(steps) + 1);
  Pose2D pose = ego.pose;
  const double v0 = ego.speed;
  traj.samples.push_back({0.0, pose, speed_at(v0, accel, 0.0, p.v_max)});
  for (int k = 0; k < steps; ++k) {
    const double t0 = k * p.dt;
    const double t1 = (k + 1) * p.dt;
    const double va = speed_at(v0, accel, t0, p.v_max);
    const double vb = speed_at(v0, accel, t1, p.v_max);
    const double kappa = t0 < switch_time - 1e-9 ? kappa1 : kappa2;
    const double ds = 0.5 * (va + vb) * p.dt;
    const double dtheta = kappa * ds;
    // Midpoint heading with the exact chord of a constant-curvature step.
    const double mid = pose.heading + 0.5 * dtheta;
    const double chord = ds * sinc(0.5 * dtheta);
    pose.x += chord * std::cos(mid);
    pose.y += chord * std::sin(mid);
    pose.heading = normalize_angle(pose.heading + dtheta);
    traj.samples.push_back({t1, pose, vb});
  }
  return traj;
}

double segment_angle(Vec2 a, Vec2 b, double fallback) {
  const Vec2 d = b - a;
  if (norm(d) < 1e-9) return fallback;
  return std::atan2(d.y, d.x);
}

Trajectory perturb(const Trajectory& seed, double d_lon, double d_lat) {
  const auto& s = seed.samples;
  const std::size_t n = s.size();
  const double t0 = s.front().t;
  const double span = seed.horizon();
  std::vector<Vec2> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = span > 0.0 ? (s[k].t - t0) / span : 0.0;
    const double ramp = tau * tau * (3.0 - 2.0 * tau);
    const Vec2 tangent = unit_from_heading(s[k].pose.heading);
    const Vec2 normal{-tangent.y, tangent.x};
    pts[k] = s[k].pose.position() + (tangent * d_lon + normal * d_lat) * ramp;
  }
  Trajectory out = seed;
  for (std::size_t k = 0; k < n; ++k) {
    auto& o = out.samples[k];
    o.pose.x = pts[k].x;
    o.pose.y = pts[k].y;
    if (k == 0 || n < 2) continue;
    // Heading and speed follow the forward segment (backward at the tail).
    const std::size_t i = k + 1 < n ? k : k - 1;
    const Vec2 a0 = s[i].pose.position();
    const Vec2 a1 = s[i + 1].pose.position();
    const double seed_ang = segment_angle(a0, a1, s[k].pose.heading);
    const double new_ang = segment_angle(pts[i], pts[i + 1], seed_ang);
    o.pose.heading = normalize_angle(s[k].pose.heading + normalize_angle(new_ang - seed_ang));
    const double ds_seed = norm(a1 - a0);
    const double ds_new = norm(pts[i + 1] - pts[i]);
    o.speed = ds_seed > 1e-9 ? s[k].speed * ds_new / ds_seed : ds_new / seed.dt;
  }
  return out;
}

}  // namespace

VocabularyParams VocabularyParams::defaults() {
  VocabularyParams p;
  // Quadratic spacing packs resolution near straight driving, where most useful plans live.
  for (double t : linspace(-1.0, 1.0, 25)) p.curvature_grid.push_back(0.2 * t * std::abs(t));
  p.accel_grid = {-5.0, -3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 2.0};
  p.second_phase = SecondPhase{2.0, {-0.04, -0.02, 0.0, 0.02, 0.04}};
  return p;
}

void validate(const VocabularyParams& p) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidParams, m); };
  if (p.curvature_grid.empty() || p.accel_grid.empty()) bad("grids must be non-empty");
  if (!(p.dt > 0.0) || !(p.horizon > 0.0)) bad("dt and horizon must be > 0");
  const double steps = p.horizon / p.dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) bad("horizon must be a multiple of dt");
  if (!(p.v_max > 0.0)) bad("v_max must be > 0");
  auto check_grid = [&](const std::vector<double>& g) {
    for (double k : g) {
      if (!std::isfinite(k) || std::abs(k) > p.kappa_max) bad("curvature exceeds kappa_max");
    }
  };
  check_grid(p.curvature_grid);
  for (double a : p.accel_grid) {
    if (!std::isfinite(a)) bad("non-finite acceleration");
  }
  if (p.second_phase) {
    if (p.second_phase->curvature_grid.empty()) bad("second-phase grid must be non-empty");
    if (p.second_phase->switch_time < 0.0 || p.second_phase->switch_time > p.horizon) {
      bad("switch_time must lie in [0, horizon]");
    }
    check_grid(p.second_phase->curvature_grid);
  }
}

void validate(const AnchorParams& p) {
  if (p.seed_count < 1) throw Error(ErrorCode::InvalidParams, "seed_count must be >= 1");
  if (!(p.noise_scale_lon >= 0.0) || !(p.noise_scale_lat >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "noise scales must be >= 0");
  }
}

std::vector<Trajectory> generate_vocabulary(const EgoState& ego, const VocabularyParams& params) {
  validate(params);
  std::vector<Trajectory> out;
  const std::vector<double> no_switch{0.0};
  const auto& second = params.second_phase ? params.second_phase->curvature_grid : no_switch;
  out.reserve(params.curvature_grid.size() * params.accel_grid.size() * second.size());
  for (double k1 : params.curvature_grid) {
    for (double a : params.accel_grid) {
      if (params.second_phase) {
        for (double k2 : second) out.push_back(rollout(ego, k1, a, k2, params.second_phase->switch_time, params));
      } else {
        out.push_back(rollout(ego, k1, a, k1, params.horizon, params));
      }
    }
  }
  return out;
}

std::vector<Trajectory> generate_anchors(const EgoState& /*ego*/, const std::vector<Trajectory>& seeds,
                                         const AnchorParams& params) {
  validate(params);
  if (seeds.empty()) throw Error(ErrorCode::InvalidParams, "anchor generation needs at least one seed");
  std::mt19937_64 rng(params.rng_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Trajectory> out;
  out.reserve(seeds.size() * static_cast<std::size_t>(params.seed_count));
  for (const auto& seed : seeds) {
    if (seed.empty()) throw Error(ErrorCode::EmptyTrajectory, "anchor seed is empty");
    for (int c = 0; c < params.seed_count; ++c) {
      // Draw both offsets unconditionally so the stream does not depend on the scales.
      double d_lon = unit(rng) * params.noise_scale_lon;
      double d_lat = unit(rng) * params.noise_scale_lat;
      if (d_lon == 0.0 && d_lat == 0.0) {
        out.push_back(seed);
        continue;
      }
      Trajectory anchor = perturb(seed, d_lon, d_lat);
      int shrink = 0;
      while (max_abs_curvature(anchor.samples) > params.kappa_max && shrink < 30) {
        d_lon *= 0.5;
        d_lat *= 0.5;
        anchor = perturb(seed, d_lon, d_lat);
        ++shrink;
      }
      if (max_abs_curvature(anchor.samples) > params.kappa_max) anchor = seed;
      out.push_back(std::move(anchor));
    }
  }
  return out;
}

std::vector<Trajectory> generate_candidates(const EgoState& ego, const VocabularyParams& vocab,
                                            const AnchorParams& anchors, std::size_t seed_stride) {
  std::vector<Trajectory> out = generate_vocabulary(ego, vocab);
  if (seed_stride == 0) return out;
  std::vector<Trajectory> seeds;
  for (std::size_t i = 0; i < out.size(); i += seed_stride) seeds.push_back(out[i]);
  auto extra = generate_anchors(ego, seeds, anchors);
  out.insert(out.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  return out;
}

}  // namespace vsf
