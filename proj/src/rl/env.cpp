#include "physworld/rl/env.hpp"

#include <algorithm>
#include <cmath>

#include "physworld/error.hpp"

namespace physworld::rl {
namespace {

// Stand-in for a final error that is not a number after a blow-up.
constexpr double kLostError = 1e3;

double finite_or_lost(double v) { return std::isfinite(v) ? v : kLostError; }

}  // namespace

ManipulationEnv::ManipulationEnv(std::shared_ptr<const sim::SimContext> context,
                                 std::size_t object, const traj::PoseTrajectory* target,
                                 const traj::BaselinePlan* plan, EnvConfig config)
    : context_(std::move(context)),
      object_(object),
      target_(target),
      plan_(plan),
      config_(std::move(config)) {
  if (!context_ || !target_ || !plan_) {
    throw Error(ErrorCode::kInvalidArgument, "environment needs a context, target and plan");
  }
  if (object_ >= context_->scene->objects.size()) {
    throw Error(ErrorCode::kInvalidArgument, "environment object index out of range");
  }
  if (plan_->steps() < 2) throw Error(ErrorCode::kInvalidArgument, "plan shorter than 2 steps");
  config_.weights.validate();
  if (!(config_.limits.translation > 0.0) || !(config_.limits.rotation > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "residual limits must be > 0");
  }
  reset_nominal();
}

Observation ManipulationEnv::reset(std::uint64_t seed) {
  world_ = sim::reset(context_, seed, config_.jitter);
  t_ = 0;
  last_feasible_command_ = {world_.gripper.pose, false};
  last_command_ = last_feasible_command_;
  last_feasible_ = true;
  return observe();
}

Observation ManipulationEnv::reset_nominal() {
  world_ = sim::reset(context_, 0, false);
  t_ = 0;
  last_feasible_command_ = {world_.gripper.pose, false};
  last_command_ = last_feasible_command_;
  last_feasible_ = true;
  return observe();
}

Observation ManipulationEnv::observe() const {
  Observation o = build_observation(world_, object_, *target_, *plan_,
                                    std::min(t_, plan_->steps() - 1));
  if (config_.mode == ActionMode::kScratch) {
    std::fill(o.begin() + obs_layout::kGrasp, o.end(), 0.0);
  }
  return o;
}

sim::Command ManipulationEnv::command_for(const Action& raw) const {
  const std::size_t t = std::min(t_, plan_->steps() - 1);
  const bool close = plan_->gripper_closed[t];
  if (config_.mode == ActionMode::kResidual) {
    return apply_residual(plan_->planned[t], to_residual(raw, config_.limits), close);
  }
  const Pose& home = context_->scene->home;
  Vec3 dp, omega;
  for (int i = 0; i < 3; ++i) {
    dp[i] = config_.scratch_position_range[i] * std::clamp(raw[i], -1.0, 1.0);
    omega[i] = config_.scratch_rotation_range * std::clamp(raw[3 + i], -1.0, 1.0);
  }
  return {Pose(home.p + dp, (quat_exp(omega) * home.q).normalized()), close};
}

StepResult ManipulationEnv::step(const Action& raw) {
  if (t_ >= plan_->steps()) {
    throw Error(ErrorCode::kStepOutOfRange, "step after the episode ended");
  }
  const sim::Command cmd = command_for(raw);
  last_feasible_ = sim::check_feasible(world_, cmd).feasible;
  if (last_feasible_) {
    last_feasible_command_ = cmd;
    last_command_ = cmd;
  } else {
    last_command_ = {last_feasible_command_.target, cmd.close};
  }

  StepResult r;
  const Pose& target = target_->pose(static_cast<std::size_t>(plan_->target_frame[t_]));
  bool exploded = false;
  try {
    sim::step(world_, last_command_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kExplosionDetected) throw;
    exploded = true;
  }
  const bool holding_phase = t_ >= plan_->close_step();
  ++t_;
  if (exploded) {
    // A blown-up episode ends at once as a failure with no tracking reward.
    r.r_grasp = holding_phase ? -config_.weights.w_grasp : 0.0;
    r.r_plan = reward_plan(last_feasible_, config_.weights);
    r.reward = r.r_grasp + r.r_plan;
    r.done = true;
    r.success = false;
    r.final_position_error = kLostError;
    r.final_rotation_error = kLostError;
    t_ = plan_->steps();
    r.obs = observe();
    return r;
  }

  const Pose& object = world_.bodies[object_].pose;
  r.r_trk = reward_tracking(object, target, config_.weights);
  r.r_grasp = reward_grasp(world_.gripper.pose.p, object.p, holding_phase, config_.weights);
  r.r_plan = reward_plan(last_feasible_, config_.weights);
  r.reward = r.r_trk + r.r_grasp + r.r_plan;
  r.done = t_ == plan_->steps();
  if (r.done) {
    r.final_position_error = finite_or_lost((object.p - target_->back().p).norm());
    r.final_rotation_error = finite_or_lost(quat_angle(object.q, target_->back().q));
    r.success = r.final_position_error < config_.success_position &&
                r.final_rotation_error < config_.success_rotation;
  }
  r.obs = observe();
  return r;
}

}  // namespace physworld::rl
