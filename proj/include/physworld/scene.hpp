#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "physworld/math.hpp"
#include "physworld/mesh.hpp"
#include "physworld/pose.hpp"
#include "physworld/properties.hpp"
#include "physworld/sdf.hpp"

namespace physworld::scene {

struct SceneObject {
  std::string name;
  std::string category;
  TriangleMesh mesh;  // object frame, metric scale
  PhysicalProperties properties;
  bool properties_defaulted = false;
  Pose initial_pose;              // includes the placement offset
  double placement_offset = 0.0;  // tau, metres along +z
};

// Physically interactable scene in a z-up world frame.
struct SceneModel {
  TriangleMesh background;
  SdfGrid sdf;
  PhysicalProperties background_properties{1.0, 0.6, 0.0};
  std::vector<SceneObject> objects;
  Vec3 gravity{0.0, 0.0, -9.81};
  Pose home;
  Aabb workspace;
  bool assembled = false;

  // Index of the named object, or -1.
  int find(const std::string& name) const;
  void validate() const;
};

// Default home pose: 0.3 m above the centroid of the objects, top-down.
Pose default_home(const SceneModel& scene, double height = 0.3);

// JSON description plus sibling mesh/SDF files under `dir`.
void save_scene(const std::filesystem::path& dir, const SceneModel& scene);
SceneModel load_scene(const std::filesystem::path& dir);

}  // namespace physworld::scene
