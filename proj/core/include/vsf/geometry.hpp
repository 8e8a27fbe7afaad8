#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace vsf {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

using Polygon = std::vector<Vec2>;
using Polyline = std::vector<Vec2>;

struct Segment {
  Vec2 a;
  Vec2 b;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Rectangle centred on `center`, long axis along `heading`.
struct OrientedBox {
  Vec2 center;
  double heading{0.0};
  double length{0.0};
  double width{0.0};

  /// Counter-clockwise: front-left, rear-left, rear-right, front-right.
  [[nodiscard]] std::array<Vec2, 4> corners() const;
};

/// Separating-axis test; boxes that only touch do not overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

/// Mean of the contact geometry (corners contained in the other box and edge crossings).
/// Falls back to the midpoint of centres when the boxes do not overlap.
Vec2 contact_point(const OrientedBox& a, const OrientedBox& b);

/// Earliest time in [0, t_max] at which two boxes translating at constant velocity overlap.
std::optional<double> first_overlap_time(const OrientedBox& a, Vec2 velocity_a,
                                         const OrientedBox& b, Vec2 velocity_b,
                                         double t_max);

/// Crossing-number test; boundary points are classified arbitrarily.
bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon);

bool polygon_is_simple(std::span<const Vec2> polygon);
double signed_area(std::span<const Vec2> polygon);

/// Parameter s in [0, 1] along p1->p2 where it meets q1->q2.
std::optional<double> segment_intersection(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2);

struct PolylineProjection {
  double arc_length{0.0};    // along the polyline to the foot point
  double distance{0.0};      // unsigned distance to the foot point
  double signed_offset{0.0}; // positive to the left of travel direction
  std::size_t segment{0};
};

PolylineProjection project_onto_polyline(Vec2 p, std::span<const Vec2> polyline);

double polyline_length(std::span<const Vec2> polyline);

}  // namespace vsf
