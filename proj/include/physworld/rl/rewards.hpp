#pragma once

#include "physworld/pose.hpp"

namespace physworld::rl {

struct RewardWeights {
  double w_pos = 1.0;
  double k_pos = 10.0;  // 1/m
  double w_ori = 0.5;
  double k_ori = 2.0;
  double w_grasp = 0.5;
  double grasp_distance = 0.1;  // m
  double w_plan = 0.1;

  void validate() const;
};

double reward_tracking(const Pose& object, const Pose& target, const RewardWeights& w);
double reward_grasp(const Vec3& ee, const Vec3& object, bool holding_phase, const RewardWeights& w);
double reward_plan(bool feasible, const RewardWeights& w);

}  // namespace physworld::rl
