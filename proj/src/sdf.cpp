#include "physworld/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "binary_io.hpp"
#include "kernels/kernels_internal.hpp"
#include "physworld/error.hpp"
#include "physworld/kernels.hpp"

namespace physworld::scene {
namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double triangle_distance2(const TriangleMesh& m, std::size_t t, const Vec3& p) {
  const auto& tri = m.triangles[t];
  return (p - closest_on_triangle(p, m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]))
      .squaredNorm();
}

// Height of triangle t above xy, if xy lies in its vertical projection.
bool height_in_triangle(const TriangleMesh& m, std::size_t t, const Vec2& xy, double& z) {
  const auto& tri = m.triangles[t];
  const Vec3 &a = m.vertices[tri[0]], &b = m.vertices[tri[1]], &c = m.vertices[tri[2]];
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
  if (std::abs(det) < 1e-300) return false;
  const double l1 = ((xy.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (xy.y() - a.y())) / det;
  const double l2 = ((b.x() - a.x()) * (xy.y() - a.y()) - (xy.x() - a.x()) * (b.y() - a.y())) / det;
  const double l0 = 1.0 - l1 - l2;
  constexpr double eps = -1e-12;
  if (l0 < eps || l1 < eps || l2 < eps) return false;
  z = l0 * a.z() + l1 * b.z() + l2 * c.z();
  return true;
}

// Uniform xy buckets over the mesh triangles with per-bucket z ranges.
class TriangleBuckets {
 public:
  TriangleBuckets(const TriangleMesh& mesh, std::size_t count) : mesh_(mesh) {
    box_ = Aabb();
    double edge = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
      const auto& tri = mesh.triangles[t];
      for (auto i : tri) box_.extend(mesh.vertices[i]);
      edge += (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]).head<2>().norm();
    }
    edge = std::max(edge / double(std::max<std::size_t>(count, 1)), 1e-9);
    cell_ = 2.0 * edge;
    const Vec3 ext = box_.extent();
    nx_ = std::max(1, int(std::ceil(ext.x() / cell_)));
    ny_ = std::max(1, int(std::ceil(ext.y() / cell_)));
    // Cap the bucket count for very fine meshes.
    while (double(nx_) * ny_ > 4e6) {
      cell_ *= 2.0;
      nx_ = std::max(1, int(std::ceil(ext.x() / cell_)));
      ny_ = std::max(1, int(std::ceil(ext.y() / cell_)));
    }
    items_.resize(std::size_t(nx_) * ny_);
    zlo_.assign(items_.size(), std::numeric_limits<double>::infinity());
    zhi_.assign(items_.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < count; ++t) {
      Aabb tb;
      for (auto i : mesh.triangles[t]) tb.extend(mesh.vertices[i]);
      const int i0 = clampx(tb.min.x()), i1 = clampx(tb.max.x());
      const int j0 = clampy(tb.min.y()), j1 = clampy(tb.max.y());
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          const std::size_t b = std::size_t(j) * nx_ + i;
          items_[b].push_back(static_cast<std::uint32_t>(t));
          zlo_[b] = std::min(zlo_[b], tb.min.z());
          zhi_[b] = std::max(zhi_[b], tb.max.z());
        }
      }
    }
  }

  // Squared distance to the nearest bucketed triangle.
  double nearest2(const Vec3& p) const {
    const int ci = clampx(p.x()), cj = clampy(p.y());
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
      for (int j = cj - r; j <= cj + r; ++j) {
        if (j < 0 || j >= ny_) continue;
        const bool edge_row = (j == cj - r || j == cj + r);
        for (int i = ci - r; i <= ci + r; i += (edge_row ? 1 : 2 * std::max(r, 1))) {
          if (i < 0 || i >= nx_) continue;
          const double lb = bucket_bound2(i, j, p);
          if (lb >= best) continue;
          for (auto t : items_[std::size_t(j) * nx_ + i]) {
            best = std::min(best, triangle_distance2(mesh_, t, p));
          }
        }
      }
      // Buckets in ring r + 1 and beyond are at least r cells away in xy.
      const double gap = double(r) * cell_;
      if (gap * gap >= best) break;
    }
    return best;
  }

  bool height(const Vec2& xy, double& z) const {
    const int i = clampx(xy.x()), j = clampy(xy.y());
    bool found = false;
    for (auto t : items_[std::size_t(j) * nx_ + i]) {
      double h;
      if (height_in_triangle(mesh_, t, xy, h)) {
        z = found ? std::max(z, h) : h;
        found = true;
      }
    }
    return found;
  }

 private:
  int clampx(double x) const {
    return std::clamp(int(std::floor((x - box_.min.x()) / cell_)), 0, nx_ - 1);
  }
  int clampy(double y) const {
    return std::clamp(int(std::floor((y - box_.min.y()) / cell_)), 0, ny_ - 1);
  }
  double bucket_bound2(int i, int j, const Vec3& p) const {
    const std::size_t b = std::size_t(j) * nx_ + i;
    if (items_[b].empty()) return std::numeric_limits<double>::infinity();
    const double x0 = box_.min.x() + i * cell_, y0 = box_.min.y() + j * cell_;
    const double dx = std::max({x0 - p.x(), 0.0, p.x() - (x0 + cell_)});
    const double dy = std::max({y0 - p.y(), 0.0, p.y() - (y0 + cell_)});
    const double dz = std::max({zlo_[b] - p.z(), 0.0, p.z() - zhi_[b]});
    return dx * dx + dy * dy + dz * dz;
  }

  const TriangleMesh& mesh_;
  Aabb box_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> items_;
  std::vector<double> zlo_, zhi_;
};

struct Skirt {
  std::size_t triangle;
  // The piece can only be nearer than the mesh when p lies beyond one of
  // these outward lines (n . xy > offset).
  std::vector<std::pair<Vec2, double>> gates;
};

}  // namespace

SdfGrid::SdfGrid(const Vec3& origin, double voxel_size, std::array<std::uint32_t, 3> dims)
    : origin_(origin),
      voxel_size_(voxel_size),
      dims_(dims),
      values_(std::size_t(dims[0]) * dims[1] * dims[2], 0.0) {}

Aabb SdfGrid::box() const {
  return {origin_, origin_ + voxel_size_ * Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1)};
}

double SdfGrid::max_adjacent_difference() const {
  double worst = 0.0;
  for (std::uint32_t k = 0; k < dims_[2]; ++k) {
    for (std::uint32_t j = 0; j < dims_[1]; ++j) {
      for (std::uint32_t i = 0; i < dims_[0]; ++i) {
        const double v = at(i, j, k);
        if (i + 1 < dims_[0]) worst = std::max(worst, std::abs(v - at(i + 1, j, k)));
        if (j + 1 < dims_[1]) worst = std::max(worst, std::abs(v - at(i, j + 1, k)));
        if (k + 1 < dims_[2]) worst = std::max(worst, std::abs(v - at(i, j, k + 1)));
      }
    }
  }
  return worst;
}

double brute_force_distance(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    best = std::min(best, triangle_distance2(mesh, t, p));
  }
  return std::sqrt(best);
}

TriangleMesh extend_open_boundary(const TriangleMesh& mesh, double reach) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, std::uint32_t>> edges;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
      auto& slot = edges[{std::min(a, b), std::max(a, b)}];
      ++slot.first;
      slot.second = tri[(e + 2) % 3];
    }
  }
  TriangleMesh out = mesh;
  out.colors.clear();
  std::map<std::uint32_t, std::vector<Vec2>> vertex_normals;
  for (const auto& [key, slot] : edges) {
    if (slot.first != 1) continue;
    const Vec3& a = mesh.vertices[key.first];
    const Vec3& b = mesh.vertices[key.second];
    const Vec3& c = mesh.vertices[slot.second];
    const Vec2 e = (b - a).head<2>();
    if (e.norm() < 1e-300) continue;
    Vec2 o(-e.y(), e.x());
    o.normalize();
    if (o.dot((c - a).head<2>()) > 0.0) o = -o;
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(a + reach * Vec3(o.x(), o.y(), 0.0));
    out.vertices.push_back(b + reach * Vec3(o.x(), o.y(), 0.0));
    out.triangles.push_back({key.first, key.second, base + 1});
    out.triangles.push_back({key.first, base + 1, base});
    vertex_normals[key.first].push_back(o);
    vertex_normals[key.second].push_back(o);
  }
  // Fill the wedge between the two extrusions meeting at a boundary corner.
  for (const auto& [v, normals] : vertex_normals) {
    if (normals.size() != 2 || normals[0].dot(normals[1]) > 1.0 - 1e-12) continue;
    const Vec3& p = mesh.vertices[v];
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(p + reach * Vec3(normals[0].x(), normals[0].y(), 0.0));
    out.vertices.push_back(p + reach * Vec3(normals[1].x(), normals[1].y(), 0.0));
    out.triangles.push_back({v, base, base + 1});
  }
  return out;
}

SdfGrid voxelize_sdf(const TriangleMesh& mesh, double voxel_size, double padding) {
  if (mesh.empty()) throw Error(ErrorCode::kEmptyMesh, "cannot voxelize an empty mesh");
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kNonPositiveVoxel, "voxel size must be > 0");
  if (padding < 0.0) throw Error(ErrorCode::kInvalidArgument, "padding must be >= 0");

  const Aabb box = mesh.bounds().inflated(padding);
  std::array<std::uint32_t, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    dims[a] = static_cast<std::uint32_t>(std::ceil(box.extent()[a] / voxel_size - 1e-9)) + 1;
    dims[a] = std::max<std::uint32_t>(dims[a], 2);
  }
  SdfGrid grid(box.min, voxel_size, dims);

  const double reach = 4.0 * (grid.box().diagonal() + padding + voxel_size);
  const TriangleMesh ext = extend_open_boundary(mesh, reach);
  const std::size_t core = mesh.triangles.size();
  TriangleBuckets buckets(ext, core);

  std::vector<Skirt> skirts;
  for (std::size_t t = core; t < ext.triangles.size(); ++t) {
    Skirt s{t, {}};
    const auto& tri = ext.triangles[t];
    // Inner vertices are the original mesh vertices of this piece.
    std::vector<Vec2> inner, outer;
    for (auto i : tri) (i < mesh.vertices.size() ? inner : outer).push_back(ext.vertices[i].head<2>());
    for (const auto& o : outer) {
      const Vec2& anchor = inner.front();
      Vec2 dir = o - anchor;
      // Outward direction of this extrusion, measured from its mesh side.
      if (inner.size() == 2) {
        const Vec2 e = inner[1] - inner[0];
        dir = Vec2(-e.y(), e.x());
        if (dir.dot(o - inner[0]) < 0.0) dir = -dir;
      }
      dir.normalize();
      s.gates.emplace_back(dir, dir.dot(anchor));
    }
    skirts.push_back(std::move(s));
  }

  std::vector<double> surface(std::size_t(dims[0]) * dims[1]);
  std::vector<std::uint8_t> has_surface(surface.size(), 0);
  for (std::uint32_t j = 0; j < dims[1]; ++j) {
    for (std::uint32_t i = 0; i < dims[0]; ++i) {
      const Vec2 xy = grid.center(i, j, 0).head<2>();
      double z = 0.0;
      bool found = buckets.height(xy, z);
      if (!found) {
        for (const auto& s : skirts) {
          double h;
          if (height_in_triangle(ext, s.triangle, xy, h)) {
            z = found ? std::max(z, h) : h;
            found = true;
          }
        }
      }
      surface[std::size_t(j) * dims[0] + i] = z;
      has_surface[std::size_t(j) * dims[0] + i] = found;
    }
  }

  std::vector<std::size_t> active;
  for (std::uint32_t j = 0; j < dims[1]; ++j) {
    for (std::uint32_t i = 0; i < dims[0]; ++i) {
      // Skirt gates depend on xy only.
      const Vec2 xy = grid.center(i, j, 0).head<2>();
      active.clear();
      for (const auto& s : skirts) {
        bool beyond = false;
        for (const auto& [n, off] : s.gates) beyond = beyond || n.dot(xy) > off;
        if (beyond) active.push_back(s.triangle);
      }
      const std::size_t col = std::size_t(j) * dims[0] + i;
      for (std::uint32_t k = 0; k < dims[2]; ++k) {
        const Vec3 p = grid.center(i, j, k);
        double best = buckets.nearest2(p);
        for (auto t : active) best = std::min(best, triangle_distance2(ext, t, p));
        const bool below = has_surface[col] && p.z() < surface[col];
        const double d = std::sqrt(best);
        grid.at(i, j, k) = below ? -d : d;
      }
    }
  }
  return grid;
}

namespace {

kernels::GridView view_of(const SdfGrid& grid) {
  kernels::GridView v;
  v.values = grid.values().data();
  v.nx = grid.dims()[0];
  v.ny = grid.dims()[1];
  v.nz = grid.dims()[2];
  for (int a = 0; a < 3; ++a) v.origin[a] = grid.origin()[a];
  v.voxel = grid.voxel_size();
  return v;
}

}  // namespace

double sample_sdf(const SdfGrid& grid, const Vec3& p) {
  return kernels::detail::sdf_sample_one(view_of(grid), p.x(), p.y(), p.z());
}

void sample_sdf(const SdfGrid& grid, std::span<const Vec3> points, std::span<double> out) {
  if (out.size() < points.size()) throw Error(ErrorCode::kInvalidArgument, "output too small");
  constexpr std::size_t kChunk = 64;
  double xs[kChunk], ys[kChunk], zs[kChunk];
  const auto view = view_of(grid);
  const auto& k = kernels::active();
  for (std::size_t base = 0; base < points.size(); base += kChunk) {
    const std::size_t n = std::min(kChunk, points.size() - base);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = points[base + i].x();
      ys[i] = points[base + i].y();
      zs[i] = points[base + i].z();
    }
    k.sdf_sample(view, xs, ys, zs, out.data() + base, n);
  }
}

Vec3 sdf_gradient(const SdfGrid& grid, const Vec3& p, double h) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = p, hi = p;
    lo[a] -= h;
    hi[a] += h;
    g[a] = (sample_sdf(grid, hi) - sample_sdf(grid, lo)) / (2.0 * h);
  }
  return g;
}

namespace {
constexpr std::array<char, 4> kMagic = {'P', 'W', 'S', 'D'};
}

void write_sdf(const std::filesystem::path& path, const SdfGrid& grid) {
  io::Writer out(path);
  out.magic(kMagic);
  for (int a = 0; a < 3; ++a) out.f64(grid.origin()[a]);
  out.f64(grid.voxel_size());
  for (int a = 0; a < 3; ++a) out.u32(grid.dims()[a]);
  for (double v : grid.values()) out.f32(static_cast<float>(v));
  out.finish();
}

SdfGrid read_sdf(const std::filesystem::path& path) {
  io::Reader in(path);
  in.expect_magic(kMagic);
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = in.f64();
  const double voxel = in.f64();
  std::array<std::uint32_t, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = in.u32();
  if (!(voxel > 0.0)) throw Error(ErrorCode::kFormat, path.string() + ": voxel size <= 0");
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2 ||
      double(dims[0]) * dims[1] * dims[2] > double(1u << 30)) {
    throw Error(ErrorCode::kFormat, path.string() + ": bad grid dimensions");
  }
  SdfGrid grid(origin, voxel, dims);
  for (auto& v : grid.values()) v = in.f32();
  in.expect_end();
  return grid;
}

}  // namespace physworld::scene
