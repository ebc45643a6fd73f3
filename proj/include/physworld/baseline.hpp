#pragma once

#include <vector>

#include "physworld/mesh.hpp"
#include "physworld/pose.hpp"
#include "physworld/trajectory.hpp"

namespace physworld::traj {

struct GraspProposal {
  Pose grasp;
  double pre_grasp_offset = 0.10;
};

struct GraspOptions {
  double grip_depth = 0.02;
  double pre_grasp_offset = 0.10;
};

// Top-down grasp at the centre of the object-frame bounding box, lowered
// grip_depth below its top, fingers closing across the shorter horizontal
// side. Computed in the object frame, then mapped through object_pose.
GraspProposal propose_grasp(const TriangleMesh& object_mesh, const Pose& object_pose,
                            const GraspOptions& options = {});

struct PhaseSteps {
  int approach = 20;
  int descend = 10;
  int track = -1;  // < 0: one step per target frame
  int hold = 10;
};

enum class Phase { kApproach, kDescend, kTrack, kHold };

struct BaselinePlan {
  Pose grasp;
  double pre_grasp_offset = 0.0;
  std::vector<Pose> planned;
  std::vector<bool> gripper_closed;
  std::vector<Phase> phase;
  // Target trajectory frame index observed at each step.
  std::vector<int> target_frame;

  std::size_t steps() const { return planned.size(); }
  // First step with the gripper closed, or steps() if it never closes.
  std::size_t close_step() const;
  Pose pre_grasp() const;
};

BaselinePlan make_baseline(const GraspProposal& grasp, const PoseTrajectory& target,
                           const Pose& home, const PhaseSteps& steps = {});

}  // namespace physworld::traj
