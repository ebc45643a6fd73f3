#pragma once

#include <cstdint>
#include <vector>

#include "physworld/depth.hpp"
#include "physworld/math.hpp"
#include "physworld/mesh.hpp"

namespace physworld::geometry {

// {x : normal . x = offset}, normal unit length.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<std::size_t> inliers;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct RansacOptions {
  int iterations = 500;
  double inlier_threshold = 0.01;
  std::uint64_t seed = 0;
  double min_inlier_ratio = 0.2;
  // Side the returned normal must face.
  Vec3 viewpoint = Vec3::Zero();
};

struct PlaneFit {
  Plane plane;
  std::uint64_t seed = 0;
  // Inlier count of every hypothesis tried; degenerate samples record 0.
  std::vector<std::size_t> trial_inlier_counts;
  std::size_t best_trial = 0;
  bool refined = false;
};

PlaneFit fit_ground_plane(const depth::PointCloud& cloud, const RansacOptions& options = {});

// Minimal rotation taking the unit normal n onto +z.
Mat3 gravity_rotation(const Vec3& n);

struct CompletionResult {
  depth::PointCloud cloud;
  std::size_t filled = 0;
  std::size_t dropped = 0;  // object pixels whose ray missed plane and bounds
};

// Replaces object points by the first hit of their camera ray with the
// support plane or the far side of the bounds. The cloud, plane and bounds
// are expressed in the frame given by camera_to_world; the cloud must carry
// source pixels for masked points.
CompletionResult complete_background(const depth::PointCloud& cloud,
                                     const std::vector<bool>& object_mask, const Plane& plane,
                                     const Aabb& bounds, const depth::CameraIntrinsics& k,
                                     const RigidTransform& camera_to_world = {});

// Minimum-z raster of a z-up cloud. Cells without points are filled from the
// nearest filled cell (squared index distance, ties to the lowest index).
struct HeightGrid {
  double cell_size = 0.01;
  Vec2 origin = Vec2::Zero();  // xy of vertex (0, 0)
  std::uint32_t nx = 0;        // vertex counts
  std::uint32_t ny = 0;
  std::vector<double> heights;  // row-major, nx * ny
  std::vector<std::uint8_t> observed;

  double at(std::uint32_t i, std::uint32_t j) const { return heights[std::size_t(j) * nx + i]; }
};

HeightGrid rasterize_heights(const depth::PointCloud& cloud, double cell_size);
TriangleMesh heightmap_mesh(const HeightGrid& grid);
TriangleMesh heightmap_mesh(const depth::PointCloud& cloud, double cell_size);

}  // namespace physworld::geometry
