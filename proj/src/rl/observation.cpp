#include "physworld/rl/observation.hpp"

#include <algorithm>

#include "physworld/error.hpp"

namespace physworld::rl {
namespace {

void put(Observation& o, std::size_t at, const Pose& p) {
  const auto f = p.flat();
  std::copy(f.begin(), f.end(), o.begin() + static_cast<std::ptrdiff_t>(at));
}

}  // namespace

Observation build_observation(const sim::WorldState& world, std::size_t object,
                              const traj::PoseTrajectory& target, const traj::BaselinePlan& plan,
                              std::size_t t) {
  const std::size_t length = plan.steps();
  if (t >= length || length < 2) {
    throw Error(ErrorCode::kStepOutOfRange,
                "step " + std::to_string(t) + " outside episode of " + std::to_string(length));
  }
  if (object >= world.bodies.size()) {
    throw Error(ErrorCode::kInvalidArgument, "observation of unknown object");
  }
  const auto frame = static_cast<std::size_t>(plan.target_frame[t]);
  if (frame >= target.size()) {
    throw Error(ErrorCode::kStepOutOfRange, "plan refers past the target trajectory");
  }
  Observation o{};
  put(o, obs_layout::kEe, world.gripper.pose);
  put(o, obs_layout::kObject, world.bodies[object].pose);
  o[obs_layout::kTime] = double(t) / double(length - 1);
  put(o, obs_layout::kTarget, target.pose(frame));
  put(o, obs_layout::kGrasp, plan.grasp);
  o[obs_layout::kPreGrasp] = plan.pre_grasp_offset;
  put(o, obs_layout::kBase, plan.planned[t]);
  return o;
}

ResidualAction to_residual(const Action& raw, const ResidualLimits& limits) {
  ResidualAction a;
  for (int i = 0; i < 3; ++i) {
    a.translation[i] =
        std::clamp(raw[i] * limits.translation, -limits.translation, limits.translation);
    a.rotation[i] = std::clamp(raw[3 + i] * limits.rotation, -limits.rotation, limits.rotation);
  }
  return a;
}

sim::Command apply_residual(const Pose& base, const ResidualAction& action, bool close) {
  return {Pose(base.p + action.translation, (quat_exp(action.rotation) * base.q).normalized()),
          close};
}

}  // namespace physworld::rl
