#include "vsf/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "vsf/error.hpp"

namespace vsf {

namespace {

constexpr double kNearPlane = 0.1;
constexpr double kAgentHeight = 1.5;

// 5x7 capitals, one byte per row, bit 4 is the leftmost column.
constexpr std::array<std::array<std::uint8_t, 7>, 26> kFont{{
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
    {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
}};

struct Rotation {
  double m[3][3];
};

// Body-to-ego rotation Rz(yaw) Ry(pitch) Rx(roll).
Rotation body_to_ego(const CameraExtrinsic& e) {
  const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
  const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
  const double cr = std::cos(e.roll), sr = std::sin(e.roll);
  return {{{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
           {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
           {-sp, cp * sr, cp * cr}}};
}

Pixel pinhole(const Vec3& c, const CameraModel& cam) {
  return {cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy};
}

bool in_bounds(const Pixel& p, const CameraModel& cam) {
  return p.u >= 0.0 && p.u < cam.width && p.v >= 0.0 && p.v < cam.height;
}

// World map coordinates into the ego frame at t = 0.
Vec3 to_ego(Vec2 p, double z, const Pose2D& ego) {
  const double dx = p.x - ego.x;
  const double dy = p.y - ego.y;
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  return {c * dx + s * dy, -s * dx + c * dy, z};
}

class Canvas {
 public:
  Canvas(Image& img, const CameraModel& cam) : img_(img), cam_(cam) {}

  void stamp(int u, int v, int width, Rgb c) {
    const int lo = -(width - 1) / 2;
    for (int dv = lo; dv < lo + width; ++dv) {
      for (int du = lo; du < lo + width; ++du) img_.set(u + du, v + dv, c);
    }
  }

  void line2d(Pixel a, Pixel b, int width, Rgb c) {
    // Liang-Barsky against a one-pixel margin around the image.
    const double xmin = -1.0, ymin = -1.0, xmax = img_.width, ymax = img_.height;
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.u - a.u, dy = b.v - a.v;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.u - xmin, xmax - a.u, a.v - ymin, ymax - a.v};
    for (int i = 0; i < 4; ++i) {
      if (p[i] == 0.0) {
        if (q[i] < 0.0) return;
        continue;
      }
      const double r = q[i] / p[i];
      if (p[i] < 0.0) t0 = std::max(t0, r);
      else t1 = std::min(t1, r);
      if (t0 > t1) return;
    }
    int x0 = static_cast<int>(std::floor(a.u + t0 * dx));
    int y0 = static_cast<int>(std::floor(a.v + t0 * dy));
    const int x1 = static_cast<int>(std::floor(a.u + t1 * dx));
    const int y1 = static_cast<int>(std::floor(a.v + t1 * dy));
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    const int ex = std::abs(x1 - x0), ey = -std::abs(y1 - y0);
    int err = ex + ey;
    while (true) {
      stamp(x0, y0, width, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= ey) {
        err += ey;
        x0 += sx;
      }
      if (e2 <= ex) {
        err += ex;
        y0 += sy;
      }
    }
  }

  void line3d(const Vec3& a, const Vec3& b, int width, Rgb c) {
    Vec3 ca = ego_to_camera(a, cam_.extrinsic);
    Vec3 cb = ego_to_camera(b, cam_.extrinsic);
    if (ca.z <= kNearPlane && cb.z <= kNearPlane) return;
    auto clip = [](Vec3& behind, const Vec3& front) {
      const double t = (kNearPlane - behind.z) / (front.z - behind.z);
      behind = {behind.x + t * (front.x - behind.x), behind.y + t * (front.y - behind.y), kNearPlane};
    };
    if (ca.z <= kNearPlane) clip(ca, cb);
    if (cb.z <= kNearPlane) clip(cb, ca);
    line2d(pinhole(ca, cam_), pinhole(cb, cam_), width, c);
  }

  void glyph(char ch, int u, int v, int scale, Rgb c) {
    if (ch < 'A' || ch > 'Z') return;
    const auto& rows = kFont[static_cast<std::size_t>(ch - 'A')];
    for (int r = 0; r < 7; ++r) {
      for (int col = 0; col < 5; ++col) {
        if (!(rows[static_cast<std::size_t>(r)] & (0x10 >> col))) continue;
        for (int dv = 0; dv < scale; ++dv) {
          for (int du = 0; du < scale; ++du) img_.set(u + col * scale + du, v + r * scale + dv, c);
        }
      }
    }
  }

  void label(const std::string& text, Pixel anchor, int scale, Rgb c) {
    const int w = static_cast<int>(text.size()) * 6 * scale + scale;
    const int h = 7 * scale + 2 * scale;
    int u = static_cast<int>(std::floor(anchor.u)) + 3;
    int v = static_cast<int>(std::floor(anchor.v)) - h - 3;
    u = std::clamp(u, 0, std::max(0, img_.width - w));
    v = std::clamp(v, 0, std::max(0, img_.height - h));
    for (int dv = 0; dv < h; ++dv) {
      for (int du = 0; du < w; ++du) img_.set(u + du, v + dv, {0, 0, 0});
    }
    for (std::size_t i = 0; i < text.size(); ++i) {
      glyph(text[i], u + scale + static_cast<int>(i) * 6 * scale, v + scale, scale, c);
    }
  }

 private:
  Image& img_;
  const CameraModel& cam_;
};

void draw_ground(Image& img, const Stage& stage, const RenderConfig& cfg) {
  const CameraModel& cam = stage.camera;
  const Rotation r = body_to_ego(cam.extrinsic);
  std::vector<Polygon> drivable;
  for (const auto& poly : stage.map.drivable) {
    Polygon local;
    for (Vec2 p : poly) {
      const Vec3 e = to_ego(p, 0.0, stage.ego.pose);
      local.push_back({e.x, e.y});
    }
    drivable.push_back(std::move(local));
  }
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const double ox = (u + 0.5 - cam.cx) / cam.fx;
      const double oy = (v + 0.5 - cam.cy) / cam.fy;
      // Optical (X, Y, 1) is body (1, -X, -Y).
      const double bx = 1.0, by = -ox, bz = -oy;
      const double dx = r.m[0][0] * bx + r.m[0][1] * by + r.m[0][2] * bz;
      const double dy = r.m[1][0] * bx + r.m[1][1] * by + r.m[1][2] * bz;
      const double dz = r.m[2][0] * bx + r.m[2][1] * by + r.m[2][2] * bz;
      if (dz >= -1e-9) continue;
      const double t = -cam.extrinsic.z / dz;
      const Vec2 g{cam.extrinsic.x + t * dx, cam.extrinsic.y + t * dy};
      if (std::hypot(g.x - cam.extrinsic.x, g.y - cam.extrinsic.y) > cfg.max_ground_range) continue;
      const bool on_road = std::any_of(drivable.begin(), drivable.end(),
                                       [&](const Polygon& p) { return point_in_polygon(g, p); });
      img.set(u, v, on_road ? cfg.road : cfg.offroad);
    }
  }
}

void draw_map(Canvas& canvas, const Stage& stage, const RenderConfig& cfg) {
  for (const auto& lane : stage.map.lanes) {
    for (std::size_t i = 0; i + 1 < lane.centerline.size(); ++i) {
      canvas.line3d(to_ego(lane.centerline[i], 0.0, stage.ego.pose), to_ego(lane.centerline[i + 1], 0.0, stage.ego.pose),
                    1, cfg.lane_line);
    }
  }
  for (const auto& agent : stage.agents) {
    const auto s = agent.state_at(0.0);
    const OrientedBox box{{s.pose.x, s.pose.y}, s.pose.heading, agent.length, agent.width};
    const auto corners = box.corners();
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec2 a = corners[i], b = corners[(i + 1) % 4];
      canvas.line3d(to_ego(a, 0.0, stage.ego.pose), to_ego(b, 0.0, stage.ego.pose), 1, cfg.agent);
      canvas.line3d(to_ego(a, kAgentHeight, stage.ego.pose), to_ego(b, kAgentHeight, stage.ego.pose), 1, cfg.agent);
      canvas.line3d(to_ego(a, 0.0, stage.ego.pose), to_ego(a, kAgentHeight, stage.ego.pose), 1, cfg.agent);
    }
  }
}

}  // namespace

void validate(const CameraModel& cam) {
  auto bad = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(cam.fx > 0.0 && cam.fy > 0.0)) bad("focal lengths must be > 0");
  if (cam.width <= 0 || cam.height <= 0) bad("image size must be positive");
  if (!(cam.cx > 0.0 && cam.cx < cam.width && cam.cy > 0.0 && cam.cy < cam.height)) {
    bad("principal point must lie inside the image");
  }
}

Vec3 ego_to_camera(const Vec3& p, const CameraExtrinsic& ext) {
  const Rotation r = body_to_ego(ext);
  const double dx = p.x - ext.x, dy = p.y - ext.y, dz = p.z - ext.z;
  // Transpose maps ego offsets into the body frame.
  const double bx = r.m[0][0] * dx + r.m[1][0] * dy + r.m[2][0] * dz;
  const double by = r.m[0][1] * dx + r.m[1][1] * dy + r.m[2][1] * dz;
  const double bz = r.m[0][2] * dx + r.m[1][2] * dy + r.m[2][2] * dz;
  return {-by, -bz, bx};
}

std::optional<Pixel> project_unbounded(const Vec3& p, const CameraModel& cam) {
  const Vec3 c = ego_to_camera(p, cam.extrinsic);
  if (c.z <= kNearPlane) return std::nullopt;
  return pinhole(c, cam);
}

std::optional<Pixel> project_point(const Vec3& p, const CameraModel& cam) {
  auto px = project_unbounded(p, cam);
  if (!px || !in_bounds(*px, cam)) return std::nullopt;
  return px;
}

Image::Image(int w, int h, Rgb fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + i);
}

void Image::set(int u, int v, Rgb c) {
  if (u < 0 || v < 0 || u >= width || v >= height) return;
  const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

Rgb Image::at(int u, int v) const {
  const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

std::string Image::to_ppm() const {
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::MalformedFile, "cannot write " + path.string());
  const std::string bytes = image.to_ppm();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void validate(const RenderConfig& cfg, std::size_t candidate_count) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (cfg.line_width < 1) bad("line width must be >= 1");
  if (cfg.label_scale < 1) bad("label scale must be >= 1");
  if (candidate_count > cfg.candidate_colors.size()) {
    bad("only " + std::to_string(cfg.candidate_colors.size()) + " candidate colours configured");
  }
  std::set<Rgb> distinct(cfg.candidate_colors.begin(), cfg.candidate_colors.end());
  if (distinct.size() != cfg.candidate_colors.size()) bad("candidate colours must be distinct");
}

Image render_scene(const Stage& stage, const RenderConfig& cfg) {
  validate(stage.camera);
  Image img(stage.camera.width, stage.camera.height, cfg.sky);
  draw_ground(img, stage, cfg);
  Canvas canvas(img, stage.camera);
  draw_map(canvas, stage, cfg);
  return img;
}

Image render_overlay(const Stage& stage, const std::vector<RenderCandidate>& candidates, const RenderConfig& cfg) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "nothing to render");
  validate(cfg, candidates.size());
  bool any_visible = false;
  std::vector<std::optional<Pixel>> anchors(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    for (const auto& s : candidates[k].trajectory.samples) {
      if (auto px = project_point(to_ego({s.pose.x, s.pose.y}, 0.0, stage.ego.pose), stage.camera)) {
        anchors[k] = px;
        any_visible = true;
      }
    }
  }
  if (!any_visible) throw Error(ErrorCode::NoVisiblePoints, "no candidate sample projects into the image");

  Image img = render_scene(stage, cfg);
  Canvas canvas(img, stage.camera);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& samples = candidates[k].trajectory.samples;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      canvas.line3d(to_ego({samples[i].pose.x, samples[i].pose.y}, 0.0, stage.ego.pose),
                    to_ego({samples[i + 1].pose.x, samples[i + 1].pose.y}, 0.0, stage.ego.pose), cfg.line_width,
                    cfg.candidate_colors[k]);
    }
  }
  // Labels last so no polyline covers them.
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (anchors[k]) canvas.label(candidates[k].label, *anchors[k], cfg.label_scale, cfg.candidate_colors[k]);
  }
  return img;
}

}  // namespace vsf
