#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "physworld/pose.hpp"

namespace physworld::traj {

struct TrajectoryFrame {
  int t = 0;
  Pose pose;
};

class PoseTrajectory {
 public:
  PoseTrajectory() = default;
  // Validates ordering, length and the per-frame displacement bound.
  explicit PoseTrajectory(std::vector<TrajectoryFrame> frames, double max_step = 0.2,
                          std::string object_name = {});

  std::size_t size() const { return frames_.size(); }
  const std::vector<TrajectoryFrame>& frames() const { return frames_; }
  const Pose& pose(std::size_t i) const { return frames_[i].pose; }
  const Pose& front() const { return frames_.front().pose; }
  const Pose& back() const { return frames_.back().pose; }
  // Frame whose index t is nearest to the query (ties to the earlier frame).
  const Pose& nearest(double t) const;
  const std::string& object_name() const { return object_name_; }
  void set_object_name(std::string name) { object_name_ = std::move(name); }

  // Applies a world motion to every frame: pose -> motion * pose.
  PoseTrajectory premultiplied(const Pose& motion) const;

 private:
  std::vector<TrajectoryFrame> frames_;
  std::string object_name_;
};

// PWTJ line format: "# PWTJ v1 [object=<name>]" header, then one record per
// line "t px py pz qw qx qy qz". Lines starting with '#' are comments.
void write_trajectory(const std::filesystem::path& path, const PoseTrajectory& trajectory);
PoseTrajectory read_trajectory(const std::filesystem::path& path, double max_step = 0.2);

}  // namespace physworld::traj
