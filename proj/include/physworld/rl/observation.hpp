#pragma once

#include <array>
#include <cstddef>

#include "physworld/baseline.hpp"
#include "physworld/trajectory.hpp"
#include "physworld/world.hpp"

namespace physworld::rl {

// [ee(7), obj(7), tau(1), target(7), grasp(7), d_pre(1), base(7)]
inline constexpr std::size_t kObservationSize = 37;
inline constexpr std::size_t kActionSize = 6;

using Observation = std::array<double, kObservationSize>;
using Action = std::array<double, kActionSize>;

namespace obs_layout {
inline constexpr std::size_t kEe = 0;
inline constexpr std::size_t kObject = 7;
inline constexpr std::size_t kTime = 14;
inline constexpr std::size_t kTarget = 15;
inline constexpr std::size_t kGrasp = 22;
inline constexpr std::size_t kPreGrasp = 29;
inline constexpr std::size_t kBase = 30;
}  // namespace obs_layout

Observation build_observation(const sim::WorldState& world, std::size_t object,
                              const traj::PoseTrajectory& target, const traj::BaselinePlan& plan,
                              std::size_t t);

struct ResidualLimits {
  double translation = 0.05;  // per-component bound, metres
  double rotation = 0.2;      // per-component bound, radians
};

struct ResidualAction {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
};

// Scales a raw policy output by the limits and clamps each component.
ResidualAction to_residual(const Action& raw, const ResidualLimits& limits = {});

// p = base.p + dp, q = exp(omega) * base.q.
sim::Command apply_residual(const Pose& base, const ResidualAction& action, bool close);

}  // namespace physworld::rl
