// Renders the tabletop fixture: a camera whose true mount is tilted 5 degrees
// from its nominal pose looks at two boxes on flat ground. Writes raw and
// reference depth, object masks, normalized object meshes, a camera-frame
// trajectory of the cube, the scene config and the manifest.
//
//   make_fixture [output_dir]   (default fixtures/tabletop)
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include <json.hpp>

#include "physworld/depth.hpp"
#include "physworld/mesh.hpp"
#include "physworld/pose.hpp"
#include "physworld/trajectory.hpp"

namespace fs = std::filesystem;
using namespace physworld;
using nlohmann::json;

namespace {

constexpr std::uint32_t kWidth = 160;
constexpr std::uint32_t kHeight = 120;
constexpr double kFocal = 150.0;
constexpr double kAlpha = 2.0;  // metric = alpha * raw + beta
constexpr double kBeta = 0.5;
constexpr double kTiltDeg = 5.0;

struct Box {
  std::string name;
  std::string category;
  Vec3 size;
  Vec3 base;  // bottom-face centre on the ground
  double yaw;
};

// Ray parameter of the first hit with an upright yawed box, or +inf.
double hit_box(const Box& b, const Vec3& o, const Vec3& d) {
  const Quat q(Eigen::AngleAxisd(b.yaw, Vec3::UnitZ()));
  const Vec3 centre = b.base + Vec3(0.0, 0.0, b.size.z() / 2);
  const Vec3 lo = q.conjugate() * (o - centre);
  const Vec3 ld = q.conjugate() * d;
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = b.size[a] / 2;
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > h) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (-h - lo[a]) / ld[a], tb = (h - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1 && t0 > 0.0 ? t0 : std::numeric_limits<double>::infinity();
}

RigidTransform look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r << x, y, z;
  return {r, eye};
}

// Unit-diagonal box centred on the origin, as an image-to-3D model would be.
TriangleMesh normalized_box(const Vec3& size) {
  const Vec3 h = size / size.norm() / 2;
  return make_box(-h, h);
}

json pose_json(const RigidTransform& t) {
  const Quat q(t.rotation);
  return {{"position", {t.translation.x(), t.translation.y(), t.translation.z()}},
          {"orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures/tabletop");
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "meshes");

  const std::vector<Box> boxes = {
      {"cube", "box", Vec3(0.04, 0.04, 0.04), Vec3(0.0, 0.0, 0.0), 20.0 * M_PI / 180.0},
      {"book", "book", Vec3(0.12, 0.08, 0.03), Vec3(-0.15, 0.08, 0.0), -10.0 * M_PI / 180.0},
  };
  const depth::CameraIntrinsics k{kFocal, kFocal, (kWidth - 1) / 2.0, (kHeight - 1) / 2.0};
  const RigidTransform nominal = look_at(Vec3(0.0, -0.45, 0.5), Vec3(0.0, 0.0, 0.0));
  // The true mount differs from the nominal one by a tilt about world x, so
  // the ground seen through the nominal pose leans by kTiltDeg.
  const Mat3 tilt = Eigen::AngleAxisd(-kTiltDeg * M_PI / 180.0, Vec3::UnitX()).toRotationMatrix();
  const RigidTransform actual{tilt * nominal.rotation, tilt * nominal.translation};

  depth::DepthMap raw(kWidth, kHeight), reference(kWidth, kHeight);
  std::vector<depth::DepthMap> masks(boxes.size(), depth::DepthMap(kWidth, kHeight));
  for (std::uint32_t v = 0; v < kHeight; ++v) {
    for (std::uint32_t u = 0; u < kWidth; ++u) {
      const Vec3 dir = actual.apply_direction(k.ray(u, v));
      double best = dir.z() < 0.0 ? -actual.translation.z() / dir.z()
                                  : std::numeric_limits<double>::infinity();
      int owner = -1;
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        const double t = hit_box(boxes[b], actual.translation, dir);
        if (t < best) {
          best = t;
          owner = static_cast<int>(b);
        }
      }
      if (!std::isfinite(best)) continue;
      // The ray has unit camera-z, so its parameter is the depth.
      raw.set(u, v, (best - kBeta) / kAlpha);
      if (u % 2 == 0 && v % 2 == 0) reference.set(u, v, best);
      if (owner >= 0) masks[std::size_t(owner)].set(u, v, 1.0);
    }
  }
  depth::write_depth_map(dir / "depth/raw_000.pwdm", raw);
  depth::write_depth_map(dir / "depth/raw_001.pwdm", raw);
  depth::write_depth_map(dir / "depth/reference.pwdm", reference);

  json objects = json::array();
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const auto& box = boxes[b];
    depth::write_depth_map(dir / "masks" / (box.name + ".pwdm"), masks[b]);
    write_obj(dir / "meshes" / (box.name + ".obj"), normalized_box(box.size));
    objects.push_back({{"name", box.name},
                       {"category", box.category},
                       {"mesh", "meshes/" + box.name + ".obj"},
                       {"mask", "masks/" + box.name + ".pwdm"}});
  }

  // Cube lifted 0.1, carried 0.15 along +y and put down, seen from the camera.
  const Box& cube = boxes[0];
  const Pose start(cube.base + Vec3(0.0, 0.0, cube.size.z() / 2),
                   Quat(Eigen::AngleAxisd(cube.yaw, Vec3::UnitZ())));
  const Pose camera_inv = Pose(actual.translation, Quat(actual.rotation)).inverse();
  std::vector<traj::TrajectoryFrame> frames;
  const int n = 40, up = 10, across = 20;
  for (int i = 0; i < n; ++i) {
    Vec3 p = start.p;
    if (i < up) {
      p.z() += 0.1 * i / up;
    } else if (i < up + across) {
      p += Vec3(0.0, 0.15 * (i - up) / across, 0.1);
    } else {
      p += Vec3(0.0, 0.15, 0.1 * (1.0 - double(i - up - across + 1) / (n - up - across)));
    }
    frames.push_back({i, camera_inv * Pose(p, start.q)});
  }
  traj::write_trajectory(dir / "trajectory.pwtj", traj::PoseTrajectory(frames, 0.2, "cube"));

  write_json(dir / "scene_config.json",
             {{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
              {"camera_to_world", pose_json(nominal)},
              {"heightmap_cell", 0.02},
              {"voxel", 0.01},
              {"sdf_padding", 0.1},
              {"plane_threshold", 0.005},
              {"ransac_iterations", 300},
              {"workspace_height", 0.6}});
  write_json(dir / "manifest.json",
             {{"format", "physworld-manifest"},
              {"version", 1},
              {"seed", 7},
              {"output", "out"},
              {"scene_config", "scene_config.json"},
              {"depth",
               {{"frames", {"depth/raw_000.pwdm", "depth/raw_001.pwdm"}},
                {"reference", "depth/reference.pwdm"}}},
              {"objects", objects},
              {"trajectory", "trajectory.pwtj"},
              {"training",
               {{"iterations", 3}, {"num_envs", 2}, {"rollout_steps", 128}, {"minibatch", 128}}},
              {"evaluation", {{"episodes", 10}}}});
  std::printf("fixture written to %s\n", dir.string().c_str());
  return 0;
}
