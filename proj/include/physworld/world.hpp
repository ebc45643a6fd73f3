#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "physworld/pose.hpp"
#include "physworld/scene.hpp"

namespace physworld::sim {

struct SimConfig {
  double control_dt = 0.05;
  int substeps = 10;
  double max_linear_speed = 0.5;   // gripper, m/s
  double max_angular_speed = 2.0;  // gripper, rad/s
  double gripper_gain = 200.0;     // 1/s, first-order pull toward the command
  double attach_distance = 0.02;
  double jitter = 0.005;  // uniform initial xy jitter half-width, metres
  double explosion_speed = 10.0;
  std::size_t max_mesh_samples = 200;
  int contact_iterations = 8;
  // Displacement bound for feasibility: rate limit x control_dt x this.
  double reach_factor = 4.0;
  // Approach speed below which contacts are treated as inelastic.
  double bounce_threshold = 0.2;
  // A body at rest this many substeps in a row is put to sleep.
  int sleep_substeps = 20;
  double sleep_linear_speed = 1e-3;
  double sleep_angular_speed = 1e-2;

  void validate() const;
};

struct RigidBodyState {
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  bool attached = false;
  // Resting bodies sleep until the gripper picks them up.
  bool sleeping = false;
  int rest_count = 0;
};

struct GripperState {
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  bool closed = false;
  std::optional<std::size_t> held_object;
  Pose held_relative;  // gripper -> object while held
};

struct Command {
  Pose target;
  bool close = false;
};

// Immutable per-scene data shared by every state stepped in that scene.
struct SimContext {
  std::shared_ptr<const scene::SceneModel> scene;  // private copy
  SimConfig config;
  std::vector<std::vector<Vec3>> sample_points;  // object frame
  std::vector<Aabb> local_bounds;
  std::vector<Vec3> inertia;  // diagonal, object frame

  static std::shared_ptr<const SimContext> make(const scene::SceneModel& scene,
                                                const SimConfig& config = {});
};

struct WorldState {
  std::shared_ptr<const SimContext> context;
  std::int64_t step = 0;
  std::vector<RigidBodyState> bodies;
  GripperState gripper;

  const scene::SceneModel& scene() const { return *context->scene; }
};

struct StepInfo {
  int contacts = 0;  // body sample points in contact during the last substep
  bool attached = false;  // attachment happened during this step
  bool released = false;
  std::optional<std::size_t> held_object;
  bool feasible = true;  // check_feasible on the pre-step state
};

WorldState reset(std::shared_ptr<const SimContext> context, std::uint64_t seed,
                 bool jitter = true);

// Advances one control step in place. Throws kExplosionDetected when a body
// exceeds the velocity guard; the state is then unspecified.
StepInfo step(WorldState& state, const Command& cmd);

enum class Infeasibility { kNone, kWorkspace, kRateLimit, kCollision };
std::string_view to_string(Infeasibility reason);

struct Feasibility {
  bool feasible = true;
  Infeasibility reason = Infeasibility::kNone;
};

Feasibility check_feasible(const WorldState& state, const Command& cmd);

double kinetic_energy(const WorldState& state);
// Smallest sampled background SDF over all body sample points.
double min_body_clearance(const WorldState& state);
// Body sample points in world frame.
std::vector<Vec3> world_sample_points(const WorldState& state, std::size_t body);

}  // namespace physworld::sim
