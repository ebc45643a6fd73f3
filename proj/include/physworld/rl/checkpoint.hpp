#pragma once

#include <filesystem>
#include <vector>

#include "physworld/rl/policy.hpp"
#include "physworld/rl/ppo.hpp"
#include "physworld/rl/rewards.hpp"

namespace physworld::rl {

struct Checkpoint {
  PolicyParameters params;
  PpoConfig config;
  RewardWeights weights;
  ActionMode mode = ActionMode::kResidual;
};

// "PWPL" container: magic, u32 version, actor/critic layer dims, f64
// parameters, then the PPO config and reward weights as f64 fields.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_curve_csv(const std::filesystem::path& path, const std::vector<IterationStats>& curve);

}  // namespace physworld::rl
