#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "physworld/math.hpp"

namespace physworld::depth {

// Row-major depth image with a per-pixel validity mask.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(std::uint32_t width, std::uint32_t height);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double value(std::uint32_t u, std::uint32_t v) const { return values_[index(u, v)]; }
  bool valid(std::uint32_t u, std::uint32_t v) const { return mask_[index(u, v)] != 0; }

  // Sets a pixel; non-finite or non-positive depths are stored as invalid.
  void set(std::uint32_t u, std::uint32_t v, double depth);
  void invalidate(std::uint32_t u, std::uint32_t v) { mask_[index(u, v)] = 0; }

  const std::vector<float>& values() const { return values_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t valid_count() const;

  std::size_t index(std::uint32_t u, std::uint32_t v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<float> values_;
  std::vector<std::uint8_t> mask_;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
  // Pixel coordinates of a camera-frame point with z > 0.
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
  // Unit-depth ray (z = 1) through pixel (u, v).
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

struct PointCloud {
  std::vector<Vec3> points;
  // Source pixel of each point; empty when the cloud was not unprojected.
  std::vector<Vec2> pixels;
  std::vector<Vec3> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_pixels() const { return pixels.size() == points.size(); }
  Aabb bounds() const;
};

// "PWDM" container: magic, u32 width, u32 height, f32 LE depths, u8 mask.
void write_depth_map(const std::filesystem::path& path, const DepthMap& map);
DepthMap read_depth_map(const std::filesystem::path& path);

}  // namespace physworld::depth
