#include <doctest.h>

#include <cmath>
#include <random>

#include "physworld/error.hpp"
#include "physworld/geometry.hpp"

using namespace physworld;
using namespace physworld::geometry;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Independent Rodrigues evaluation: R = cos t I + sin t [u]x + (1 - cos t) u u^T.
Mat3 rodrigues(const Vec3& u, double t) {
  Mat3 k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return std::cos(t) * Mat3::Identity() + std::sin(t) * k +
         (1 - std::cos(t)) * u * u.transpose();
}

}  // namespace

TEST_CASE("ground plane from a noisy-free plane with outliers") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  depth::PointCloud cloud;
  for (int i = 0; i < 1000; ++i) cloud.points.emplace_back(u(rng), u(rng), 0.0);
  for (int i = 0; i < 50; ++i) cloud.points.emplace_back(u(rng), u(rng), 0.2 + 0.5 * (u(rng) + 1));
  RansacOptions opt;
  opt.seed = 42;
  opt.viewpoint = Vec3(0, 0, 1);
  const auto fit = fit_ground_plane(cloud, opt);
  CHECK(std::acos(std::min(1.0, fit.plane.normal.dot(Vec3::UnitZ()))) < 1e-6);
  CHECK(std::abs(fit.plane.offset) < 1e-6);
  CHECK(fit.plane.inliers.size() == 1000);
  CHECK(std::abs(fit.plane.normal.norm() - 1.0) < 1e-9);
  // The returned set dominates every hypothesis tried.
  REQUIRE(fit.trial_inlier_counts.size() == 500);
  for (auto c : fit.trial_inlier_counts) CHECK(fit.plane.inliers.size() >= c);
  // Deterministic under the recorded seed.
  const auto again = fit_ground_plane(cloud, opt);
  CHECK(again.trial_inlier_counts == fit.trial_inlier_counts);
  CHECK(again.plane.normal == fit.plane.normal);
  CHECK(fit.seed == 42);
}

TEST_CASE("plane orientation faces the viewpoint") {
  depth::PointCloud cloud;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) cloud.points.emplace_back(0.1 * i, 0.1 * j, 1.0);
  RansacOptions opt;
  opt.viewpoint = Vec3::Zero();
  CHECK(fit_ground_plane(cloud, opt).plane.normal.z() < 0.0);
  opt.viewpoint = Vec3(0, 0, 2);
  CHECK(fit_ground_plane(cloud, opt).plane.normal.z() > 0.0);
}

TEST_CASE("three points define a unique plane") {
  depth::PointCloud cloud;
  cloud.points = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  RansacOptions opt;
  opt.viewpoint = Vec3(1, 1, 1);
  const auto fit = fit_ground_plane(cloud, opt);
  const Vec3 expected = Vec3(1, 1, 1).normalized();
  CHECK((fit.plane.normal - expected).norm() < 1e-9);
  CHECK(fit.plane.offset == doctest::Approx(1.0 / std::sqrt(3.0)));
}

TEST_CASE("degenerate plane inputs") {
  depth::PointCloud line;
  for (int i = 0; i < 20; ++i) line.points.emplace_back(0.1 * i, 0.2 * i, 0.0);
  CHECK(code_of([&] { fit_ground_plane(line); }) == ErrorCode::kNoConsensus);
  depth::PointCloud two;
  two.points = {Vec3::Zero(), Vec3::UnitX()};
  CHECK(code_of([&] { fit_ground_plane(two); }) == ErrorCode::kTooFewPoints);
}

TEST_CASE("gravity rotation examples") {
  CHECK(gravity_rotation(Vec3::UnitZ()).isApprox(Mat3::Identity(), 0.0));

  const Mat3 r = gravity_rotation(Vec3::UnitX());
  CHECK((r - rodrigues(Vec3(0, -1, 0), M_PI / 2)).norm() < 1e-12);
  CHECK((r * Vec3::UnitX() - Vec3::UnitZ()).norm() < 1e-12);

  const Mat3 flip = gravity_rotation(-Vec3::UnitZ());
  CHECK((flip * -Vec3::UnitZ() - Vec3::UnitZ()).norm() < 1e-12);
  CHECK(flip.determinant() == doctest::Approx(1.0));
  CHECK(rotation_angle(flip) == doctest::Approx(M_PI));

  CHECK(code_of([] { gravity_rotation(Vec3(0, 0, 2)); }) == ErrorCode::kNonUnitNormal);
}

TEST_CASE("gravity rotation is a minimal proper rotation for random normals") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10000; ++i) {
    Vec3 n = random_unit(rng);
    // Exercise the near-aligned and near-antipodal regimes too.
    if (i % 100 == 1) n = Vec3(1e-10 * (i % 7), -1e-11, 1.0).normalized();
    if (i % 100 == 2) n = Vec3(3e-9, 1e-10, -1.0).normalized();
    const Mat3 r = gravity_rotation(n);
    CHECK((r * n - Vec3::UnitZ()).norm() < 1e-9);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
    const bool antipodal = n.cross(Vec3::UnitZ()).norm() < 1e-12 && n.z() < 0;
    // arccos(n . e_z), evaluated in the well-conditioned atan2 form.
    const double expected = antipodal ? M_PI : std::atan2(n.cross(Vec3::UnitZ()).norm(), n.z());
    CHECK(std::abs(rotation_angle(r) - expected) < 1e-9);
  }
}

TEST_CASE("background completion") {
  // Camera at (0, 0, 1) looking straight down; ground z = 0.
  depth::CameraIntrinsics k{100.0, 100.0, 10.0, 10.0};
  RigidTransform cam;
  cam.rotation = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  cam.translation = Vec3(0, 0, 1);
  Plane ground;
  const Aabb bounds{Vec3(-1, -1, -0.1), Vec3(1, 1, 1.5)};

  SUBCASE("no object pixels leaves the cloud unchanged") {
    depth::PointCloud cloud;
    cloud.points = {Vec3(0.1, 0.2, 0.0), Vec3(-0.3, 0.1, 0.0)};
    const auto res = complete_background(cloud, {false, false}, ground, bounds, k, cam);
    CHECK(res.cloud.points == cloud.points);
    CHECK(res.filled == 0);
  }
  SUBCASE("object pixel is replaced by the ground hit") {
    depth::PointCloud cloud;
    cloud.points = {Vec3(0.05, 0.0, 0.1)};
    cloud.pixels = {Vec2(15.0, 10.0)};
    const auto res = complete_background(cloud, {true}, ground, bounds, k, cam);
    REQUIRE(res.cloud.size() == 1);
    // Ray direction cam.rotation * (0.05, 0, 1) = (0.05, 0, -1): hits z = 0 at t = 1.
    CHECK((res.cloud.points[0] - Vec3(0.05, 0.0, 0.0)).norm() < 1e-12);
  }
  SUBCASE("ray parallel to the plane ends on the bounds face") {
    depth::PointCloud cloud;
    cloud.points = {Vec3::Zero()};
    cloud.pixels = {Vec2(0.0, 0.0)};
    RigidTransform side;  // camera looking along +x at z = 0.5
    side.rotation << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    side.translation = Vec3(0, 0, 0.5);
    depth::CameraIntrinsics kk{100.0, 100.0, 0.0, 0.0};
    const auto res = complete_background(cloud, {true}, ground, bounds, kk, side);
    REQUIRE(res.filled == 1);
    CHECK((res.cloud.points[0] - Vec3(1.0, 0.0, 0.5)).norm() < 1e-12);
  }
  SUBCASE("rays that never enter the bounds are dropped") {
    depth::PointCloud cloud;
    cloud.points = {Vec3::Zero()};
    cloud.pixels = {Vec2(10.0, 10.0)};
    RigidTransform outside = cam;
    outside.translation = Vec3(5, 5, 1);
    const auto res = complete_background(cloud, {true}, ground, bounds, k, outside);
    CHECK(res.dropped == 1);
    CHECK(res.cloud.empty());
  }
}

TEST_CASE("completion never leaves the bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  depth::CameraIntrinsics k{50.0, 50.0, 32.0, 24.0};
  for (int trial = 0; trial < 50; ++trial) {
    RigidTransform cam;
    cam.rotation = Eigen::AngleAxisd(M_PI - 0.5 * u(rng), Vec3::UnitX()).toRotationMatrix();
    cam.translation = Vec3(u(rng) - 0.5, u(rng) - 0.5, 0.5 + u(rng));
    Plane ground;
    ground.normal = Vec3(0.1 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5), 1.0).normalized();
    ground.offset = 0.05 * (u(rng) - 0.5);
    const Aabb bounds{Vec3(-0.8, -0.8, -0.2), Vec3(0.8, 0.8, 2.0)};
    depth::PointCloud cloud;
    std::vector<bool> mask;
    for (int i = 0; i < 200; ++i) {
      cloud.points.emplace_back(0, 0, 1);
      cloud.pixels.emplace_back(64 * u(rng), 48 * u(rng));
      mask.push_back(i % 3 != 0);
    }
    const auto res = complete_background(cloud, mask, ground, bounds, k, cam);
    CHECK(res.filled + res.dropped == 133);
    const Aabb slack = bounds.inflated(1e-9);
    for (const auto& p : res.cloud.points) CHECK(slack.contains(p));
  }
}

TEST_CASE("height map of a unit square") {
  depth::PointCloud cloud;
  cloud.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  const auto mesh = heightmap_mesh(cloud, 1.0);
  CHECK(mesh.vertices.size() == 4);
  CHECK(mesh.triangles.size() == 2);
  for (const auto& v : mesh.vertices) CHECK(v.z() == 0.0);
  CHECK(mesh.triangle_area(0) + mesh.triangle_area(1) == doctest::Approx(1.0));
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                       .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    CHECK(n.z() > 0.0);  // upward facing
  }
}

TEST_CASE("staircase heights follow the per-cell minimum") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(0.0, 0.004), up(0.0, 0.05);
  depth::PointCloud cloud;
  const double cell = 0.01;
  // 20 x 10 vertices; the stair level steps up every 5 columns.
  std::vector<double> oracle(20 * 10, INFINITY);
  for (int j = 0; j < 10; ++j) {
    for (int i = 0; i < 20; ++i) {
      const double level = 0.02 * (i / 5);
      for (int s = 0; s < 4; ++s) {
        const double z = level + (s == 0 ? 0.0 : up(rng));
        cloud.points.emplace_back(i * cell + (i == 0 && j == 0 && s == 0 ? 0.0 : jitter(rng)),
                                  j * cell + (i == 0 && j == 0 && s == 0 ? 0.0 : jitter(rng)), z);
      }
    }
  }
  const auto grid = rasterize_heights(cloud, cell);
  // Direct per-cell minimum over the generated points.
  const Vec2 origin = grid.origin;
  for (const auto& p : cloud.points) {
    const long i = std::lround((p.x() - origin.x()) / cell);
    const long j = std::lround((p.y() - origin.y()) / cell);
    double& o = oracle[j * 20 + i];
    o = std::min(o, p.z());
  }
  REQUIRE(grid.nx == 20);
  REQUIRE(grid.ny == 10);
  for (std::uint32_t j = 0; j < 10; ++j) {
    for (std::uint32_t i = 0; i < 20; ++i) {
      CHECK(grid.at(i, j) == oracle[j * 20 + i]);
      CHECK(grid.at(i, j) == doctest::Approx(0.02 * (i / 5)));
    }
  }

  SUBCASE("meshing the mesh vertices reproduces the heights") {
    const auto mesh = heightmap_mesh(grid);
    depth::PointCloud verts;
    verts.points = mesh.vertices;
    const auto again = rasterize_heights(verts, cell);
    CHECK(again.nx == grid.nx);
    CHECK(again.ny == grid.ny);
    CHECK(again.heights == grid.heights);
  }
}

TEST_CASE("holes take the nearest filled height") {
  depth::PointCloud cloud;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i)
      if (!(i == 2 && j == 2) && !(i == 4 && j == 4)) cloud.points.emplace_back(i * 0.1, j * 0.1, i * 0.01);
  const auto grid = rasterize_heights(cloud, 0.1);
  CHECK_FALSE(grid.observed[2 * 5 + 2]);
  // Nearest filled neighbours at squared distance 1: (1,2) with lowest index.
  CHECK(grid.at(2, 2) == doctest::Approx(grid.at(2, 1)));
  CHECK(grid.at(4, 4) == doctest::Approx(grid.at(4, 3)));
}

TEST_CASE("height map errors") {
  depth::PointCloud empty;
  CHECK(code_of([&] { heightmap_mesh(empty, 0.01); }) == ErrorCode::kEmptyCloud);
}

TEST_CASE("rotation survives the canonical tilt round trip") {
  // A 5 degree tilt about x is undone exactly.
  const Mat3 tilt = rodrigues(Vec3::UnitX(), 5.0 * M_PI / 180.0);
  const Vec3 n = tilt * Vec3::UnitZ();
  const Mat3 r = gravity_rotation(n);
  CHECK(rotation_angle(r) == doctest::Approx(5.0 * M_PI / 180.0).epsilon(1e-12));
  CHECK((r * tilt - Mat3::Identity()).norm() < 1e-12);
}
