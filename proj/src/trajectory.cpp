#include "physworld/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "physworld/error.hpp"

namespace physworld::traj {

PoseTrajectory::PoseTrajectory(std::vector<TrajectoryFrame> frames, double max_step,
                               std::string object_name)
    : frames_(std::move(frames)), object_name_(std::move(object_name)) {
  if (frames_.size() < 2) throw Error(ErrorCode::kInvalidArgument, "trajectory needs >= 2 frames");
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].t <= frames_[i - 1].t) {
      throw Error(ErrorCode::kInvalidArgument,
                  "frame indices not strictly increasing at record " + std::to_string(i));
    }
    const double jump = (frames_[i].pose.p - frames_[i - 1].pose.p).norm();
    if (jump > max_step) {
      throw Error(ErrorCode::kInvalidArgument, "frame " + std::to_string(frames_[i].t) +
                                                   " moves " + std::to_string(jump) + " m");
    }
  }
}

const Pose& PoseTrajectory::nearest(double t) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), t,
                             [](const TrajectoryFrame& f, double v) { return f.t < v; });
  if (it == frames_.begin()) return it->pose;
  if (it == frames_.end()) return frames_.back().pose;
  const auto prev = it - 1;
  return (t - prev->t) <= (it->t - t) ? prev->pose : it->pose;
}

PoseTrajectory PoseTrajectory::premultiplied(const Pose& motion) const {
  PoseTrajectory out = *this;
  for (auto& f : out.frames_) f.pose = motion * f.pose;
  return out;
}

void write_trajectory(const std::filesystem::path& path, const PoseTrajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "# PWTJ v1";
  if (!trajectory.object_name().empty()) out << " object=" << trajectory.object_name();
  out << '\n';
  char buf[256];
  for (const auto& f : trajectory.frames()) {
    const auto v = f.pose.flat();
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", f.t, v[0],
                  v[1], v[2], v[3], v[4], v[5], v[6]);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

PoseTrajectory read_trajectory(const std::filesystem::path& path, double max_step) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  std::vector<TrajectoryFrame> frames;
  std::string name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (auto pos = line.find("object="); pos != std::string::npos) {
        std::istringstream(line.substr(pos + 7)) >> name;
      }
      continue;
    }
    std::istringstream ss(line);
    TrajectoryFrame f;
    double v[7];
    if (!(ss >> f.t >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5] >> v[6])) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": expected 't px py pz qw qx qy qz'");
    }
    const Quat q(v[3], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::kFormat,
                  path.string() + ":" + std::to_string(line_no) + ": quaternion not unit");
    }
    f.pose = Pose(Vec3(v[0], v[1], v[2]), q);
    frames.push_back(f);
  }
  return PoseTrajectory(std::move(frames), max_step, name);
}

}  // namespace physworld::traj
