#pragma once

#include "physworld/depth.hpp"
#include "physworld/mesh.hpp"

namespace physworld::scene {

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

struct RegistrationOptions {
  int max_icp_iterations = 30;
  // Surface samples drawn from the mesh in addition to its vertices.
  std::size_t surface_samples = 2000;
};

struct Registration {
  SimilarityTransform transform;
  double yaw = 0.0;  // radians about +z
  double mean_distance = 0.0;
  int icp_iterations = 0;
};

// Scales by the bounding-box diagonal ratio, aligns centroids, then refines
// yaw about +z by point-to-point ICP, keeping only improving refinements.
Registration register_mesh(const TriangleMesh& mesh, const depth::PointCloud& observed,
                           const RegistrationOptions& options = {});

}  // namespace physworld::scene
