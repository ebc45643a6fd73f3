#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "physworld/error.hpp"
#include "physworld/world.hpp"
#include "support/scenes.hpp"

using namespace physworld;
using namespace physworld::sim;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

scene::SceneModel one_box_scene(double z = 0.0, double restitution = 0.0) {
  auto s = testing::flat_ground_scene();
  testing::add_box(s, "box", Vec3(0.04, 0.04, 0.04), Vec3(0.05, -0.02, z), {0.2, 0.6, restitution});
  return s;
}

Command hold(const WorldState& s, bool close = false) { return {s.gripper.pose, close}; }

bool same_state(const WorldState& a, const WorldState& b) {
  auto bits = [](const Vec3& x, const Vec3& y) { return std::memcmp(x.data(), y.data(), 24) == 0; };
  if (a.step != b.step || a.bodies.size() != b.bodies.size()) return false;
  for (std::size_t i = 0; i < a.bodies.size(); ++i) {
    const auto &x = a.bodies[i], &y = b.bodies[i];
    if (!bits(x.pose.p, y.pose.p) || x.pose.q.coeffs() != y.pose.q.coeffs() ||
        !bits(x.linear_velocity, y.linear_velocity) ||
        !bits(x.angular_velocity, y.angular_velocity) || x.attached != y.attached) {
      return false;
    }
  }
  return bits(a.gripper.pose.p, b.gripper.pose.p) &&
         a.gripper.pose.q.coeffs() == b.gripper.pose.q.coeffs() &&
         a.gripper.held_object == b.gripper.held_object;
}

}  // namespace

TEST_CASE("reset") {
  const auto scene = one_box_scene();
  const auto ctx = SimContext::make(scene);
  const auto exact = reset(ctx, 1, false);
  CHECK(exact.bodies[0].pose.p == scene.objects[0].initial_pose.p);
  CHECK(exact.bodies[0].pose.q.coeffs() == scene.objects[0].initial_pose.q.coeffs());
  CHECK(exact.gripper.pose.p == scene.home.p);
  CHECK_FALSE(exact.gripper.closed);
  CHECK(exact.step == 0);

  CHECK(same_state(reset(ctx, 7), reset(ctx, 7)));
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = reset(ctx, seed);
    const Vec3 d = s.bodies[0].pose.p - scene.objects[0].initial_pose.p;
    CHECK(std::abs(d.x()) <= 0.005);
    CHECK(std::abs(d.y()) <= 0.005);
    CHECK(d.z() == 0.0);
    differing += d.head<2>().norm() > 0.0;
  }
  CHECK(differing == 100);

  auto raw = scene;
  raw.assembled = false;
  CHECK(code_of([&] { SimContext::make(raw); }) == ErrorCode::kUnassembledScene);
}

TEST_CASE("resting contact is stable") {
  const auto scene = one_box_scene(0.0);
  auto s = reset(SimContext::make(scene), 0, false);
  const Vec3 start = s.bodies[0].pose.p;
  for (int i = 0; i < 100; ++i) {
    step(s, hold(s));
    CHECK(min_body_clearance(s) >= -1e-3);
  }
  CHECK((s.bodies[0].pose.p - start).norm() <= 1e-3);
}

TEST_CASE("dropped box settles on the ground") {
  const auto scene = one_box_scene(0.2, 0.0);
  auto s = reset(SimContext::make(scene), 0, false);
  for (int i = 0; i < 60; ++i) {
    step(s, hold(s));
    CHECK(min_body_clearance(s) >= -1e-3);
  }
  // The box frame origin is its bottom face, so the support height is 0.
  CHECK(std::abs(s.bodies[0].pose.p.z()) <= 2e-3);
  CHECK(s.bodies[0].linear_velocity.norm() < 1e-2);
}

TEST_CASE("bouncy box rebounds then settles") {
  const auto scene = one_box_scene(0.2, 0.8);
  auto s = reset(SimContext::make(scene), 0, false);
  double highest_after_impact = 0.0;
  bool impacted = false;
  for (int i = 0; i < 100; ++i) {
    step(s, hold(s));
    CHECK(min_body_clearance(s) >= -1e-3);
    if (s.bodies[0].linear_velocity.z() > 0.5) impacted = true;
    if (impacted) highest_after_impact = std::max(highest_after_impact, s.bodies[0].pose.p.z());
  }
  CHECK(impacted);
  CHECK(highest_after_impact > 0.05);
  CHECK(highest_after_impact < 0.2);
}

TEST_CASE("weld keeps the relative transform") {
  const auto scene = one_box_scene();
  auto s = reset(SimContext::make(scene), 0, false);
  const Pose top(scene.objects[0].initial_pose.p + Vec3(0, 0, 0.03), top_down(0.0));
  s.gripper.pose = top;
  auto info = step(s, {top, true});
  CHECK(info.attached);
  REQUIRE(s.gripper.held_object == std::optional<std::size_t>(0));
  const Vec3 before = s.bodies[0].pose.p;
  const Pose rel = s.gripper.pose.inverse() * s.bodies[0].pose;
  Pose target = top;
  for (int i = 1; i <= 5; ++i) {
    target.p = top.p + Vec3(0.02 * i, 0, 0);
    step(s, {target, true});
    const Pose now = s.gripper.pose.inverse() * s.bodies[0].pose;
    CHECK((now.p - rel.p).norm() < 1e-9);
    CHECK(quat_distance(now.q, rel.q) < 1e-9);
  }
  for (int i = 0; i < 3; ++i) step(s, {target, true});
  CHECK((s.bodies[0].pose.p - before - Vec3(0.1, 0, 0)).norm() < 1e-6);
  CHECK(s.bodies[0].attached);

  // Releasing hands over the gripper velocity.
  target.p += Vec3(0.02, 0, 0.0);
  info = step(s, {target, false});
  CHECK(info.released);
  CHECK_FALSE(s.bodies[0].attached);
  CHECK_FALSE(s.gripper.held_object.has_value());
}

TEST_CASE("attachment requires proximity") {
  const auto scene = one_box_scene();
  auto s = reset(SimContext::make(scene), 0, false);
  const Vec3 top = scene.objects[0].initial_pose.p + Vec3(0, 0, 0.04);
  // 0.021 m from the nearest face: too far.
  s.gripper.pose = Pose(top + Vec3(0.041, 0, 0), top_down(0.0));
  auto info = step(s, hold(s, true));
  CHECK_FALSE(info.attached);
  s.gripper.pose = Pose(top + Vec3(0.039, 0, 0), top_down(0.0));
  info = step(s, hold(s, true));
  CHECK(info.attached);
}

TEST_CASE("rate limits bound the gripper motion") {
  const auto scene = one_box_scene();
  auto s = reset(SimContext::make(scene), 0, false);
  const Pose start = s.gripper.pose;
  step(s, {Pose(start.p + Vec3(1.0, 0, 0), quat_exp(Vec3(0, 0, 1.5)) * start.q), false});
  CHECK((s.gripper.pose.p - start.p).norm() <= 0.5 * 0.05 + 1e-12);
  CHECK(quat_angle(s.gripper.pose.q, start.q) <= 2.0 * 0.05 + 1e-9);
  // A reachable command is reached within one control step.
  const Pose near(s.gripper.pose.p + Vec3(0.01, -0.01, 0.005), s.gripper.pose.q);
  step(s, {near, false});
  CHECK((s.gripper.pose.p - near.p).norm() < 1e-12);
}

TEST_CASE("feasibility rules") {
  const auto scene = one_box_scene();
  auto s = reset(SimContext::make(scene), 0, false);
  CHECK(check_feasible(s, hold(s)).feasible);
  auto far = hold(s);
  far.target.p += Vec3(1.0, 0, 0);
  CHECK(check_feasible(s, far).reason == Infeasibility::kWorkspace);
  auto jump = hold(s);
  jump.target.p += Vec3(0.2, 0, 0);
  CHECK(check_feasible(s, jump).reason == Infeasibility::kRateLimit);
  s.gripper.pose.p = Vec3(0.1, 0.1, 0.0);
  auto below = hold(s);
  below.target.p = Vec3(0.1, 0.1, -0.04);
  CHECK(scene::sample_sdf(scene.sdf, below.target.p) == doctest::Approx(-0.04));
  CHECK(check_feasible(s, below).reason == Infeasibility::kCollision);
  CHECK(to_string(Infeasibility::kRateLimit) == "rate-limit");
}

TEST_CASE("kinetic energy never grows without commands") {
  const auto scene = one_box_scene(0.0, 0.0);
  auto s = reset(SimContext::make(scene), 0, false);
  s.bodies[0].linear_velocity = Vec3(0.4, 0.1, 0.0);
  s.bodies[0].angular_velocity = Vec3(0.0, 0.0, 1.0);
  double last = kinetic_energy(s);
  for (int i = 0; i < 40; ++i) {
    step(s, hold(s));
    const double e = kinetic_energy(s);
    CHECK(e <= last + 1e-9);
    last = e;
  }
  CHECK(last < 1e-6);
}

TEST_CASE("explosion guard") {
  const auto scene = one_box_scene(0.1);
  auto s = reset(SimContext::make(scene), 0, false);
  s.bodies[0].linear_velocity = Vec3(20.0, 0, 0);
  CHECK(code_of([&] { step(s, hold(s)); }) == ErrorCode::kExplosionDetected);
}

TEST_CASE("simulation is deterministic and never penetrates") {
  auto scene = one_box_scene(0.05, 0.3);
  testing::add_box(scene, "bar", Vec3(0.1, 0.03, 0.03), Vec3(-0.1, 0.05, 0.0), {0.3, 0.4, 0.1}, 0.7);
  const auto ctx = SimContext::make(scene);
  int grasps = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Command> cmds;
    Pose target = scene.home;
    for (int i = 0; i < 80; ++i) {
      const Vec3 goal = scene.objects[i / 40].initial_pose.p + Vec3(0, 0, 0.02);
      target.p += 0.02 * (goal - target.p).normalized() + Vec3(0.004 * u(rng), 0.004 * u(rng), 0);
      if (i % 40 > 30) target.p.z() += 0.03;
      cmds.push_back({target, i % 40 > 20});
    }
    auto a = reset(ctx, seed), b = reset(ctx, seed);
    for (const auto& c : cmds) {
      step(a, c);
      step(b, c);
      CHECK(min_body_clearance(a) >= -1e-3);
      const bool held = a.gripper.held_object.has_value();
      int attached = 0;
      for (const auto& body : a.bodies) attached += body.attached;
      CHECK(attached == (held ? 1 : 0));
      grasps += held;
    }
    CHECK(same_state(a, b));
  }
  CHECK(grasps > 0);
}
