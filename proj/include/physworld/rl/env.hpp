#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "physworld/baseline.hpp"
#include "physworld/rl/observation.hpp"
#include "physworld/rl/rewards.hpp"
#include "physworld/scene.hpp"
#include "physworld/trajectory.hpp"
#include "physworld/world.hpp"

namespace physworld::rl {

struct StepResult {
  Observation obs{};
  double reward = 0.0;
  double r_trk = 0.0;
  double r_grasp = 0.0;
  double r_plan = 0.0;
  bool done = false;
  bool success = false;  // meaningful when done
  double final_position_error = 0.0;
  double final_rotation_error = 0.0;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& raw) = 0;
  // Deterministic variant used for evaluation (no initial-state noise).
  virtual Observation reset_nominal() { return reset(0); }
  virtual std::size_t episode_length() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

enum class ActionMode {
  kResidual,  // raw actions refine the baseline plan
  kScratch,   // raw actions are absolute poses; baseline hidden from the policy
};

struct EnvConfig {
  RewardWeights weights;
  ActionMode mode = ActionMode::kResidual;
  ResidualLimits limits;
  bool jitter = true;
  double success_position = 0.03;
  double success_rotation = 0.3;
  // Scratch mode maps raw actions onto home +/- these half-ranges.
  Vec3 scratch_position_range{0.3, 0.3, 0.3};
  double scratch_rotation_range = 1.5707963267948966;
};

// The manipulation task in the simulated scene: tracks the named object's
// target trajectory with the baseline plan plus residual corrections.
class ManipulationEnv : public Environment {
 public:
  ManipulationEnv(std::shared_ptr<const sim::SimContext> context, std::size_t object,
                  const traj::PoseTrajectory* target, const traj::BaselinePlan* plan,
                  EnvConfig config);

  Observation reset(std::uint64_t seed) override;
  Observation reset_nominal() override;
  StepResult step(const Action& raw) override;
  std::size_t episode_length() const override { return plan_->steps(); }

  const sim::WorldState& world() const { return world_; }
  std::size_t step_index() const { return t_; }
  // Command issued by the last step, after the feasibility fallback.
  const sim::Command& last_command() const { return last_command_; }
  bool last_feasible() const { return last_feasible_; }

  Observation observe() const;
  sim::Command command_for(const Action& raw) const;

 private:
  std::shared_ptr<const sim::SimContext> context_;
  std::size_t object_;
  const traj::PoseTrajectory* target_;
  const traj::BaselinePlan* plan_;
  EnvConfig config_;
  sim::WorldState world_;
  std::size_t t_ = 0;
  sim::Command last_feasible_command_;
  sim::Command last_command_;
  bool last_feasible_ = true;
};

}  // namespace physworld::rl
