#include "physworld/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "physworld/error.hpp"

namespace physworld::geometry {
namespace {

std::size_t count_inliers(const std::vector<Vec3>& pts, const Vec3& n, double d, double thr,
                          std::vector<std::size_t>* out = nullptr) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::abs(n.dot(pts[i]) - d) <= thr) {
      ++count;
      if (out) out->push_back(i);
    }
  }
  return count;
}

void orient_toward(Plane& plane, const Vec3& viewpoint) {
  const double side = plane.signed_distance(viewpoint);
  bool flip = side < 0.0;
  if (std::abs(side) < 1e-12) {
    Eigen::Index k;
    plane.normal.cwiseAbs().maxCoeff(&k);
    flip = plane.normal[k] < 0.0;
  }
  if (flip) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
}

}  // namespace

PlaneFit fit_ground_plane(const depth::PointCloud& cloud, const RansacOptions& options) {
  const auto& pts = cloud.points;
  if (pts.size() < 3) throw Error(ErrorCode::kTooFewPoints, "plane fit needs 3 points");
  if (options.iterations <= 0 || !(options.inlier_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "RANSAC needs iterations > 0 and threshold > 0");
  }

  PlaneFit fit;
  fit.seed = options.seed;
  fit.trial_inlier_counts.reserve(options.iterations);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  const double scale = std::max(cloud.bounds().diagonal(), 1e-300);

  std::size_t best = 0;
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  for (int trial = 0; trial < options.iterations; ++trial) {
    std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    std::size_t count = 0;
    if (a != b && b != c && a != c) {
      const Vec3 cross = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
      if (cross.norm() > 1e-12 * scale * scale) {
        const Vec3 n = cross.normalized();
        const double d = n.dot(pts[a]);
        count = count_inliers(pts, n, d, options.inlier_threshold);
        if (count > best) {
          best = count;
          best_n = n;
          best_d = d;
          fit.best_trial = static_cast<std::size_t>(trial);
        }
      }
    }
    fit.trial_inlier_counts.push_back(count);
  }
  if (best == 0 || double(best) < options.min_inlier_ratio * double(pts.size())) {
    throw Error(ErrorCode::kNoConsensus, "best plane explains " + std::to_string(best) + " of " +
                                             std::to_string(pts.size()) + " points");
  }

  Plane plane;
  plane.normal = best_n;
  plane.offset = best_d;
  count_inliers(pts, best_n, best_d, options.inlier_threshold, &plane.inliers);

  // Least-squares refinement: normal is the smallest-eigenvalue direction of
  // the inlier covariance. Kept only if it does not lose inliers.
  Vec3 centroid = Vec3::Zero();
  for (auto i : plane.inliers) centroid += pts[i];
  centroid /= double(plane.inliers.size());
  Mat3 cov = Mat3::Zero();
  for (auto i : plane.inliers) {
    const Vec3 d = pts[i] - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.info() == Eigen::Success && eig.eigenvalues()[1] > 1e-18 * scale * scale) {
    const Vec3 n = eig.eigenvectors().col(0).normalized();
    const double d = n.dot(centroid);
    std::vector<std::size_t> refined;
    if (count_inliers(pts, n, d, options.inlier_threshold, &refined) >= best) {
      plane.normal = n;
      plane.offset = d;
      plane.inliers = std::move(refined);
      fit.refined = true;
    }
  }
  orient_toward(plane, options.viewpoint);
  fit.plane = std::move(plane);
  return fit;
}

Mat3 gravity_rotation(const Vec3& n_in) {
  const double len = n_in.norm();
  if (!(std::abs(len - 1.0) <= 1e-6)) {
    throw Error(ErrorCode::kNonUnitNormal, "normal length " + std::to_string(len));
  }
  const Vec3 n = n_in / len;
  const Vec3 axis = n.cross(Vec3::UnitZ());
  const double s = axis.norm();
  const double c = n.z();
  // Rodrigues stays accurate down to tiny |axis|; the fixed branches are only
  // taken when the axis is numerically undefined.
  if (s < 1e-12) {
    if (c > 0.0) return Mat3::Identity();
    return Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  }
  const Vec3 u = axis / s;
  Mat3 k;
  k << 0.0, -u.z(), u.y(), u.z(), 0.0, -u.x(), -u.y(), u.x(), 0.0;
  return Mat3::Identity() + s * k + (1.0 - c) * (k * k);
}

CompletionResult complete_background(const depth::PointCloud& cloud,
                                     const std::vector<bool>& object_mask, const Plane& plane,
                                     const Aabb& bounds, const depth::CameraIntrinsics& k,
                                     const RigidTransform& camera_to_world) {
  if (object_mask.size() != cloud.size()) {
    throw Error(ErrorCode::kInvalidArgument, "object mask size does not match cloud");
  }
  if (!bounds.valid() || !(bounds.min.array() < bounds.max.array()).all()) {
    throw Error(ErrorCode::kInvalidArgument, "scene bounds are empty");
  }
  k.validate();
  const bool any_object = std::find(object_mask.begin(), object_mask.end(), true) != object_mask.end();
  if (any_object && !cloud.has_pixels()) {
    throw Error(ErrorCode::kInvalidArgument, "object points need source pixels");
  }
  const bool colored = cloud.colors.size() == cloud.size();

  CompletionResult result;
  auto& out = result.cloud;
  const Vec3 origin = camera_to_world.translation;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!object_mask[i]) {
      out.points.push_back(cloud.points[i]);
      if (cloud.has_pixels()) out.pixels.push_back(cloud.pixels[i]);
      if (colored) out.colors.push_back(cloud.colors[i]);
      continue;
    }
    const Vec2& px = cloud.pixels[i];
    const Vec3 dir = camera_to_world.apply_direction(k.ray(px.x(), px.y()));

    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-300) {
        if (origin[a] < bounds.min[a] || origin[a] > bounds.max[a]) t_exit = -1.0;
        continue;
      }
      double t0 = (bounds.min[a] - origin[a]) / dir[a];
      double t1 = (bounds.max[a] - origin[a]) / dir[a];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_exit = std::min(t_exit, t1);
    }
    const double t_lo = std::max(t_enter, 0.0);
    if (!(t_exit > 0.0) || t_exit < t_lo) {
      ++result.dropped;
      continue;
    }
    double t = t_exit;
    const double denom = plane.normal.dot(dir);
    if (std::abs(denom) > 1e-12) {
      const double t_plane = (plane.offset - plane.normal.dot(origin)) / denom;
      if (t_plane > 0.0 && t_plane >= t_lo && t_plane <= t_exit) t = t_plane;
    }
    out.points.push_back(bounds.clamp(origin + t * dir));
    out.pixels.push_back(px);
    if (colored) out.colors.push_back(cloud.colors[i]);
    ++result.filled;
  }
  if (!cloud.has_pixels()) out.pixels.clear();
  return result;
}

HeightGrid rasterize_heights(const depth::PointCloud& cloud, double cell_size) {
  if (cloud.empty()) throw Error(ErrorCode::kEmptyCloud, "height map of an empty cloud");
  if (!(cell_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cell size must be positive");
  const Aabb box = cloud.bounds();
  HeightGrid g;
  g.cell_size = cell_size;
  g.origin = box.min.head<2>();
  g.nx = static_cast<std::uint32_t>(std::lround(box.extent().x() / cell_size)) + 1;
  g.ny = static_cast<std::uint32_t>(std::lround(box.extent().y() / cell_size)) + 1;
  const std::size_t n = std::size_t(g.nx) * g.ny;
  g.heights.assign(n, std::numeric_limits<double>::infinity());
  g.observed.assign(n, 0);
  for (const auto& p : cloud.points) {
    const auto i = static_cast<std::uint32_t>(
        std::clamp<long>(std::lround((p.x() - g.origin.x()) / cell_size), 0, g.nx - 1));
    const auto j = static_cast<std::uint32_t>(
        std::clamp<long>(std::lround((p.y() - g.origin.y()) / cell_size), 0, g.ny - 1));
    const std::size_t c = std::size_t(j) * g.nx + i;
    g.heights[c] = std::min(g.heights[c], p.z());
    g.observed[c] = 1;
  }

  std::vector<std::size_t> filled;
  for (std::size_t c = 0; c < n; ++c) {
    if (g.observed[c]) filled.push_back(c);
  }
  if (filled.size() < n) {
    std::vector<double> src = g.heights;
    for (std::size_t c = 0; c < n; ++c) {
      if (g.observed[c]) continue;
      const long ci = long(c % g.nx), cj = long(c / g.nx);
      long best = std::numeric_limits<long>::max();
      std::size_t best_c = filled.front();
      for (std::size_t f : filled) {
        const long di = long(f % g.nx) - ci, dj = long(f / g.nx) - cj;
        const long d2 = di * di + dj * dj;
        if (d2 < best) {
          best = d2;
          best_c = f;
        }
      }
      g.heights[c] = src[best_c];
    }
  }
  return g;
}

TriangleMesh heightmap_mesh(const HeightGrid& g) {
  if (g.nx < 2 || g.ny < 2) {
    throw Error(ErrorCode::kInvalidArgument, "height map spans less than one cell");
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(g.heights.size());
  for (std::uint32_t j = 0; j < g.ny; ++j) {
    for (std::uint32_t i = 0; i < g.nx; ++i) {
      mesh.vertices.emplace_back(g.origin.x() + i * g.cell_size, g.origin.y() + j * g.cell_size,
                                 g.at(i, j));
    }
  }
  for (std::uint32_t j = 0; j + 1 < g.ny; ++j) {
    for (std::uint32_t i = 0; i + 1 < g.nx; ++i) {
      const std::uint32_t a = j * g.nx + i, b = a + 1, c = a + g.nx, d = c + 1;
      mesh.triangles.push_back({a, b, d});
      mesh.triangles.push_back({a, d, c});
    }
  }
  return mesh;
}

TriangleMesh heightmap_mesh(const depth::PointCloud& cloud, double cell_size) {
  return heightmap_mesh(rasterize_heights(cloud, cell_size));
}

}  // namespace physworld::geometry
