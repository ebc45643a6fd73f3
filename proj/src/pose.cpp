#include "physworld/pose.hpp"

#include <cmath>

namespace physworld {

Quat canonical(const Quat& q_in) {
  Quat q = q_in.normalized();
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (double v : c) {
    if (v > 0.0) return q;
    if (v < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

Quat quat_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-8) {
    // Taylor expansion of cos(theta/2) and sin(theta/2)/theta.
    const double t2 = theta * theta;
    const Vec3 v = omega * (0.5 - t2 / 48.0);
    return Quat(1.0 - t2 / 8.0, v.x(), v.y(), v.z());
  }
  const double half = 0.5 * theta;
  const Vec3 v = omega * (std::sin(half) / theta);
  return Quat(std::cos(half), v.x(), v.y(), v.z());
}

Vec3 quat_log(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v / q.w();
  return v * (2.0 * std::atan2(s, q.w()) / s);
}

double quat_distance(const Quat& q1, const Quat& q2) {
  return std::min((q1.coeffs() - q2.coeffs()).norm(), (q1.coeffs() + q2.coeffs()).norm());
}

double quat_angle(const Quat& q1, const Quat& q2) {
  const Quat r = q1.conjugate() * q2;
  return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w()));
}

Quat slerp(const Quat& q1, const Quat& q2, double s) {
  // Constant angular rate along the shorter arc: q1 * exp(s * log(q1^-1 q2)).
  const Vec3 arc = quat_log(q1.conjugate() * q2);
  return canonical((q1 * quat_exp(s * arc)).normalized());
}

Pose Pose::inverse() const {
  const Quat qi = q.conjugate();
  return Pose(-(qi * p), qi);
}

Pose Pose::operator*(const Pose& rhs) const { return Pose(p + q * rhs.p, q * rhs.q); }

Pose Pose::from_transform(const RigidTransform& t) { return Pose(t.translation, Quat(t.rotation)); }

std::array<double, 7> Pose::flat() const {
  return {p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z()};
}

Quat top_down(double closing_yaw) {
  const double c = std::cos(closing_yaw), s = std::sin(closing_yaw);
  Mat3 r;
  r.col(0) = Vec3(-s, c, 0.0);
  r.col(1) = Vec3(c, s, 0.0);
  r.col(2) = Vec3(0.0, 0.0, -1.0);
  return canonical(Quat(r));
}

}  // namespace physworld
