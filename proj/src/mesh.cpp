#include "physworld/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "physworld/error.hpp"

namespace physworld {

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

double TriangleMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles[i];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

void TriangleMesh::validate() const {
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (auto idx : triangles[i]) {
      if (idx >= vertices.size()) {
        throw Error(ErrorCode::kFormat, "triangle " + std::to_string(i) + " index out of range");
      }
    }
    if (triangle_area(i) <= 1e-12) {
      throw Error(ErrorCode::kFormat, "triangle " + std::to_string(i) + " is degenerate");
    }
  }
  if (!colors.empty() && colors.size() != vertices.size()) {
    throw Error(ErrorCode::kFormat, "color count does not match vertex count");
  }
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = t.apply(v);
  return out;
}

TriangleMesh scaled(const TriangleMesh& mesh, double scale) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v *= scale;
  return out;
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                            (i & 4) ? hi.z() : lo.z());
  }
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  char buf[160];
  const bool color = mesh.colors.size() == mesh.vertices.size();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    if (color) {
      const auto& c = mesh.colors[i];
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g %.9g %.9g %.9g\n", v.x(), v.y(), v.z(),
                    c.x(), c.y(), c.z());
    } else {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    }
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

namespace {

// Face tokens may be "i", "i/t", "i//n" or "i/t/n"; negative indices are relative.
std::uint32_t parse_face_index(const std::string& token, std::size_t vertex_count,
                               const std::string& where) {
  long idx = 0;
  try {
    idx = std::stol(token.substr(0, token.find('/')));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, where + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;
  if (idx < 1 || static_cast<std::size_t>(idx) > vertex_count) {
    throw Error(ErrorCode::kFormat, where + ": face index out of range");
  }
  return static_cast<std::uint32_t>(idx - 1);
}

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  bool any_color = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw Error(ErrorCode::kFormat, where + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ss >> r >> g >> b) {
        any_color = true;
        mesh.colors.resize(mesh.vertices.size() - 1, Vec3::Zero());
        mesh.colors.emplace_back(r, g, b);
      }
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ss >> tok) idx.push_back(parse_face_index(tok, mesh.vertices.size(), where));
      if (idx.size() < 3) throw Error(ErrorCode::kFormat, where + ": face with < 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      }
    }
  }
  if (any_color) mesh.colors.resize(mesh.vertices.size(), Vec3::Zero());
  return mesh;
}

}  // namespace physworld
