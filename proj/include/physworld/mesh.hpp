#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "physworld/math.hpp"

namespace physworld {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> colors;  // optional, per vertex

  bool empty() const { return vertices.empty() || triangles.empty(); }
  Aabb bounds() const;
  double triangle_area(std::size_t i) const;
  // Throws kFormat on out-of-range indices or triangles with area <= 1e-12.
  void validate() const;
};

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t);
TriangleMesh scaled(const TriangleMesh& mesh, double scale);

// Axis-aligned box mesh, 12 outward-wound triangles.
TriangleMesh make_box(const Vec3& min, const Vec3& max);

// Wavefront OBJ subset: "v x y z [r g b]" and triangular "f" records.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace physworld
