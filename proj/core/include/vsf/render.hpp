#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};
};

struct Pixel {
  double u{0.0};
  double v{0.0};
};

void validate(const CameraModel& cam);

/// Ego frame (x forward, y left, z up) to the optical frame (X right, Y down, Z forward).
/// The camera body is rotated by Rz(yaw) Ry(pitch) Rx(roll); positive pitch tilts the axis down.
Vec3 ego_to_camera(const Vec3& p, const CameraExtrinsic& ext);

/// Pinhole projection; none when Z <= 0.1 m or the pixel falls outside the image.
std::optional<Pixel> project_point(const Vec3& p, const CameraModel& cam);

/// Same without the image-bounds test, for clipping lines at the border.
std::optional<Pixel> project_unbounded(const Vec3& p, const CameraModel& cam);

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h, Rgb fill);

  void set(int u, int v, Rgb c);
  [[nodiscard]] Rgb at(int u, int v) const;
  /// Binary P6.
  [[nodiscard]] std::string to_ppm() const;
};

void write_ppm(const std::filesystem::path& path, const Image& image);

struct RenderConfig {
  int line_width{2};
  int label_scale{2};
  std::vector<Rgb> candidate_colors{{{230, 25, 75}},  {{60, 180, 75}},  {{0, 130, 200}},  {{245, 130, 48}},
                                    {{145, 30, 180}}, {{70, 240, 240}}, {{240, 50, 230}}, {{255, 225, 25}}};
  Rgb sky{135, 180, 225};
  Rgb offroad{96, 128, 72};
  Rgb road{88, 88, 92};
  Rgb lane_line{235, 235, 235};
  Rgb agent{250, 250, 0};
  double max_ground_range{150.0};
};

void validate(const RenderConfig& cfg, std::size_t candidate_count);

struct RenderCandidate {
  std::string label;
  Trajectory trajectory;
};

/// Flat-ground front view of the stage with every candidate drawn in its colour and lettered
/// at its last visible point. Throws NoVisiblePoints when no candidate sample is in view.
Image render_overlay(const Stage& stage, const std::vector<RenderCandidate>& candidates,
                     const RenderConfig& cfg = {});

/// Scene only, no candidates.
Image render_scene(const Stage& stage, const RenderConfig& cfg = {});

}  // namespace vsf
