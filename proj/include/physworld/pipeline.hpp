#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "physworld/depth.hpp"
#include "physworld/error.hpp"
#include "physworld/rl/env.hpp"
#include "physworld/rl/ppo.hpp"

namespace physworld::pipeline {

namespace fs = std::filesystem;

struct ObjectEntry {
  std::string name;
  std::string category;
  fs::path mesh;
  fs::path mask;  // PWDM; valid pixels belong to the object
};

// Camera and reconstruction settings shared by calibrate and build-scene.
struct SceneConfig {
  depth::CameraIntrinsics intrinsics;
  RigidTransform camera_to_world;  // nominal mount; refined by gravity alignment
  double heightmap_cell = 0.02;
  double voxel = 0.01;
  double sdf_padding = 0.1;
  double plane_threshold = 0.005;
  int ransac_iterations = 500;
  double workspace_height = 0.6;
};

struct TaskConfig {
  Vec3 grasp_offset = Vec3::Zero();  // added to the proposed grasp point
  traj::PhaseSteps phases;
};

// Every path is absolute after loading (relative ones resolve against the
// manifest's directory).
struct Manifest {
  fs::path path;
  std::uint64_t seed = 0;
  fs::path output;
  fs::path scene_config;
  std::vector<fs::path> depth_frames;
  fs::path reference_depth;
  std::vector<ObjectEntry> objects;
  std::optional<fs::path> trajectory;
  std::optional<fs::path> property_table;
  TaskConfig task;
  rl::PpoConfig training;
  rl::RewardWeights rewards;
  rl::ActionMode mode = rl::ActionMode::kResidual;
  std::size_t episodes = 10;
  bool run_calibrate = true;
  bool run_build_scene = true;
  bool run_train = true;
  bool run_evaluate = true;
};

// Parses and checks that every referenced input exists (kIo otherwise).
Manifest load_manifest(const fs::path& path);
SceneConfig load_scene_config(const fs::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<int> iterations;
  std::optional<std::size_t> episodes;
  std::optional<fs::path> log;  // replay input
  bool resume = false;
};

// Seed of a named sub-stream of the manifest seed.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);

// Output layout under the output directory.
struct Layout {
  fs::path root;
  fs::path calibrate() const { return root / "calibrate"; }
  fs::path scene() const { return root / "scene"; }
  fs::path train() const { return root / "train"; }
  fs::path evaluate() const { return root / "evaluate"; }
  fs::path replay() const { return root / "replay"; }
  fs::path log() const { return root / "pipeline.log"; }
};

// Runs one subcommand (calibrate, build-scene, train, evaluate, run,
// replay) and returns the process exit code: 0 success, 1 internal error,
// 2 invalid input. Progress goes to `out`, diagnostics to `err`.
int run_command(const std::string& command, const fs::path& manifest, const Overrides& overrides,
                std::ostream& out, std::ostream& err);

// Exit code for a library error.
int exit_code(ErrorCode code);

}  // namespace physworld::pipeline
