#pragma once

#include <array>

#include "physworld/math.hpp"

namespace physworld {

using Quat = Eigen::Quaterniond;

// Unit quaternion with w >= 0 (ties at w == 0 broken on x, then y, then z).
Quat canonical(const Quat& q);

// Quaternion of the rotation by |omega| about omega / |omega|.
Quat quat_exp(const Vec3& omega);
// Rotation vector of q, the inverse of quat_exp on the canonical hemisphere.
Vec3 quat_log(const Quat& q);

// min(|q1 - q2|, |q1 + q2|): Euclidean distance made double-cover safe.
double quat_distance(const Quat& q1, const Quat& q2);
// Geodesic angle between the two rotations, in [0, pi].
double quat_angle(const Quat& q1, const Quat& q2);

// Shortest-arc spherical interpolation; s = 0 gives q1.
Quat slerp(const Quat& q1, const Quat& q2, double s);

// Position plus sign-canonical unit orientation.
struct Pose {
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& position, const Quat& orientation)
      : p(position), q(canonical(orientation)) {}

  Vec3 apply(const Vec3& x) const { return p + q * x; }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  RigidTransform transform() const { return {q.toRotationMatrix(), p}; }
  static Pose from_transform(const RigidTransform& t);

  // [px, py, pz, qw, qx, qy, qz]
  std::array<double, 7> flat() const;
};

// Top-down orientation: approach axis (local +z) along world -z, closing
// axis (local +y) along the given horizontal direction.
Quat top_down(double closing_yaw);

}  // namespace physworld
