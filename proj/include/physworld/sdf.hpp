#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "physworld/math.hpp"
#include "physworld/mesh.hpp"

namespace physworld::scene {

// Signed distances sampled at voxel centers origin + (i, j, k) * voxel_size.
// Negative values lie below the surface.
class SdfGrid {
 public:
  SdfGrid() = default;
  SdfGrid(const Vec3& origin, double voxel_size, std::array<std::uint32_t, 3> dims);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<std::uint32_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return (std::size_t(k) * dims_[1] + j) * dims_[0] + i;
  }
  double at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const { return values_[index(i, j, k)]; }
  double& at(std::uint32_t i, std::uint32_t j, std::uint32_t k) { return values_[index(i, j, k)]; }
  Vec3 center(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return origin_ + voxel_size_ * Vec3(i, j, k);
  }
  Aabb box() const;
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Largest |difference| between axis-adjacent voxels.
  double max_adjacent_difference() const;

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 0.0;
  std::array<std::uint32_t, 3> dims_{0, 0, 0};
  std::vector<double> values_;
};

// Exact signed distance to an open height-field mesh. The open boundary is
// continued horizontally beyond the grid so the sign rule (below surface =
// inside) stays consistent everywhere in the padded box.
SdfGrid voxelize_sdf(const TriangleMesh& mesh, double voxel_size, double padding);

// Unsigned distance from p to the nearest triangle, by linear scan.
double brute_force_distance(const TriangleMesh& mesh, const Vec3& p);

// Extends every boundary edge of a height-field mesh outward by `reach`.
TriangleMesh extend_open_boundary(const TriangleMesh& mesh, double reach);

// Trilinear inside the grid; outside, the value at the clamped point plus the
// distance to the grid box.
double sample_sdf(const SdfGrid& grid, const Vec3& p);
void sample_sdf(const SdfGrid& grid, std::span<const Vec3> points, std::span<double> out);

// Central difference of sample_sdf with step h along each axis.
Vec3 sdf_gradient(const SdfGrid& grid, const Vec3& p, double h);

// "PWSD" container: magic, origin 3xf64, voxel f64, dims 3xu32, f32 values.
void write_sdf(const std::filesystem::path& path, const SdfGrid& grid);
SdfGrid read_sdf(const std::filesystem::path& path);

}  // namespace physworld::scene
