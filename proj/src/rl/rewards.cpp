#include "physworld/rl/rewards.hpp"

#include <cmath>

#include "physworld/error.hpp"

namespace physworld::rl {

void RewardWeights::validate() const {
  for (double v : {w_pos, k_pos, w_ori, k_ori, w_grasp, w_plan}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "reward weights must be finite and >= 0");
    }
  }
  if (!(grasp_distance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grasp distance threshold must be > 0");
  }
}

double reward_tracking(const Pose& object, const Pose& target, const RewardWeights& w) {
  return w.w_pos * std::exp(-w.k_pos * (object.p - target.p).norm()) +
         w.w_ori * std::exp(-w.k_ori * quat_distance(object.q, target.q));
}

double reward_grasp(const Vec3& ee, const Vec3& object, bool holding_phase,
                    const RewardWeights& w) {
  if (holding_phase && (ee - object).norm() > w.grasp_distance) return -w.w_grasp;
  return 0.0;
}

double reward_plan(bool feasible, const RewardWeights& w) { return feasible ? 0.0 : -w.w_plan; }

}  // namespace physworld::rl
