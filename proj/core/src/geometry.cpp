#include "vsf/geometry.hpp"

#include <algorithm>
#include <limits>

namespace vsf {

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f = unit_from_heading(heading) * (0.5 * length);
  const Vec2 l = Vec2{-std::sin(heading), std::cos(heading)} * (0.5 * width);
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

namespace {

struct Interval {
  double lo;
  double hi;
};

Interval project(const std::array<Vec2, 4>& pts, Vec2 axis) {
  Interval out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : pts) {
    const double d = dot(p, axis);
    out.lo = std::min(out.lo, d);
    out.hi = std::max(out.hi, d);
  }
  return out;
}

std::array<Vec2, 4> axes_of(const OrientedBox& a, const OrientedBox& b) {
  return {unit_from_heading(a.heading), unit_from_heading(a.heading + std::numbers::pi / 2),
          unit_from_heading(b.heading), unit_from_heading(b.heading + std::numbers::pi / 2)};
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  for (const Vec2 axis : axes_of(a, b)) {
    const Interval ia = project(ca, axis);
    const Interval ib = project(cb, axis);
    if (std::max(ia.lo, ib.lo) >= std::min(ia.hi, ib.hi)) return false;
  }
  return true;
}

Vec2 contact_point(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  Vec2 sum{};
  int n = 0;
  for (const auto& p : ca) {
    if (point_in_polygon(p, cb)) {
      sum = sum + p;
      ++n;
    }
  }
  for (const auto& p : cb) {
    if (point_in_polygon(p, ca)) {
      sum = sum + p;
      ++n;
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const Vec2 p1 = ca[i];
      const Vec2 p2 = ca[(i + 1) % 4];
      if (auto s = segment_intersection(p1, p2, cb[j], cb[(j + 1) % 4])) {
        sum = sum + (p1 + (p2 - p1) * *s);
        ++n;
      }
    }
  }
  if (n == 0) return 0.5 * (a.center + b.center);
  return sum * (1.0 / n);
}

std::optional<double> first_overlap_time(const OrientedBox& a, Vec2 velocity_a,
                                         const OrientedBox& b, Vec2 velocity_b,
                                         double t_max) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 rel = velocity_b - velocity_a;
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  for (const Vec2 axis : axes_of(a, b)) {
    const Interval ia = project(ca, axis);
    const Interval ib = project(cb, axis);
    const double d = dot(rel, axis);
    if (d == 0.0) {
      if (std::max(ia.lo, ib.lo) >= std::min(ia.hi, ib.hi)) return std::nullopt;
      continue;
    }
    // Open interval of t where ib + t*d overlaps ia.
    double enter = (ia.lo - ib.hi) / d;
    double exit = (ia.hi - ib.lo) / d;
    if (enter > exit) std::swap(enter, exit);
    t_lo = std::max(t_lo, enter);
    t_hi = std::min(t_hi, exit);
    if (t_lo >= t_hi) return std::nullopt;
  }
  if (t_hi <= 0.0 || t_lo > t_max) return std::nullopt;
  // An overlap that opens exactly at t_max has zero measure inside the window.
  if (t_lo == t_max) return std::nullopt;
  return std::max(t_lo, 0.0);
}

bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double signed_area(std::span<const Vec2> polygon) {
  double acc = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) acc += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * acc;
}

bool polygon_is_simple(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex and are skipped.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segment_intersection(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

std::optional<double> segment_intersection(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const Vec2 r = p2 - p1;
  const Vec2 s = q2 - q1;
  const double denom = cross(r, s);
  if (denom == 0.0) return std::nullopt;  // parallel or collinear
  const Vec2 qp = q1 - p1;
  const double t = cross(qp, s) / denom;
  const double u = cross(qp, r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

PolylineProjection project_onto_polyline(Vec2 p, std::span<const Vec2> polyline) {
  PolylineProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec2 a = polyline[i];
    const Vec2 ab = polyline[i + 1] - a;
    const double len = norm(ab);
    double s = 0.0;
    if (len > 0.0) s = std::clamp(dot(p - a, ab) / (len * len), 0.0, 1.0);
    const Vec2 foot = a + ab * s;
    const double d = norm(p - foot);
    if (d < best.distance) {
      best.distance = d;
      best.arc_length = walked + s * len;
      best.segment = i;
      const double side = len > 0.0 ? cross(ab, p - a) / len : 0.0;
      best.signed_offset = side >= 0.0 ? d : -d;
    }
    walked += len;
  }
  return best;
}

double polyline_length(std::span<const Vec2> polyline) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) total += norm(polyline[i + 1] - polyline[i]);
  return total;
}

}  // namespace vsf
