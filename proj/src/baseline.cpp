#include "physworld/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "physworld/error.hpp"

namespace physworld::traj {

GraspProposal propose_grasp(const TriangleMesh& object_mesh, const Pose& object_pose,
                            const GraspOptions& options) {
  if (object_mesh.vertices.empty()) throw Error(ErrorCode::kEmptyMesh, "grasp on empty mesh");
  const Aabb box = object_mesh.bounds();
  const Vec3 c = box.center();
  const Vec3 ext = box.extent();
  // Fingers close across the shorter horizontal side.
  const double yaw = ext.x() <= ext.y() ? 0.0 : 0.5 * M_PI;
  const Pose local(Vec3(c.x(), c.y(), box.max.z() - options.grip_depth), top_down(yaw));
  return {object_pose * local, options.pre_grasp_offset};
}

std::size_t BaselinePlan::close_step() const {
  auto it = std::find(gripper_closed.begin(), gripper_closed.end(), true);
  return static_cast<std::size_t>(it - gripper_closed.begin());
}

Pose BaselinePlan::pre_grasp() const {
  const Vec3 approach = grasp.q * Vec3::UnitZ();
  return Pose(grasp.p - pre_grasp_offset * approach, grasp.q);
}

BaselinePlan make_baseline(const GraspProposal& proposal, const PoseTrajectory& target,
                           const Pose& home, const PhaseSteps& steps) {
  if (target.size() < 2) throw Error(ErrorCode::kInvalidArgument, "target needs >= 2 frames");
  if (proposal.pre_grasp_offset < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "pre-grasp offset must be >= 0");
  }
  const int track = steps.track < 0 ? static_cast<int>(target.size()) : steps.track;
  if (steps.approach < 1 || steps.descend < 1 || track < 2 || steps.hold < 0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid phase step counts");
  }

  BaselinePlan plan;
  plan.grasp = proposal.grasp;
  plan.pre_grasp_offset = proposal.pre_grasp_offset;
  const Pose pre = plan.pre_grasp();
  auto push = [&](const Pose& pose, bool closed, Phase phase, int frame) {
    plan.planned.push_back(pose);
    plan.gripper_closed.push_back(closed);
    plan.phase.push_back(phase);
    plan.target_frame.push_back(frame);
  };

  for (int i = 0; i < steps.approach; ++i) {
    const double s = double(i + 1) / steps.approach;
    push(Pose((1.0 - s) * home.p + s * pre.p, slerp(home.q, pre.q, s)), false, Phase::kApproach,
         0);
  }
  for (int i = 0; i < steps.descend; ++i) {
    const double s = double(i + 1) / steps.descend;
    push(Pose((1.0 - s) * pre.p + s * plan.grasp.p, slerp(pre.q, plan.grasp.q, s)),
         i + 1 == steps.descend, Phase::kDescend, 0);
  }
  // Rigid transport: the gripper follows the object's motion relative to frame 0.
  const Pose start_inv = target.front().inverse();
  const std::size_t last = target.size() - 1;
  for (int k = 0; k < track; ++k) {
    const auto f = static_cast<std::size_t>(std::lround(double(k) * last / double(track - 1)));
    const Pose motion = target.pose(f) * start_inv;
    push(motion * plan.grasp, true, Phase::kTrack, static_cast<int>(f));
  }
  const Pose final_pose = plan.planned.back();
  for (int i = 0; i < steps.hold; ++i) push(final_pose, false, Phase::kHold, int(last));
  return plan;
}

}  // namespace physworld::traj
