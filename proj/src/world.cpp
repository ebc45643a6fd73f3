#include "physworld/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "physworld/error.hpp"

namespace physworld::sim {
namespace {

struct Contact {
  Vec3 r;  // from the centre of mass
  Vec3 n;
  double phi;
  double acc_n = 0.0;
  Vec3 acc_t = Vec3::Zero();
  double bounce = 0.0;  // target separating speed
};

// 8 corners, 12 edge midpoints and 6 face centres of a box.
std::vector<Vec3> box_samples(const Aabb& b) {
  std::vector<Vec3> out;
  const Vec3 c = b.center();
  for (int x = -1; x <= 1; ++x) {
    for (int y = -1; y <= 1; ++y) {
      for (int z = -1; z <= 1; ++z) {
        if (x == 0 && y == 0 && z == 0) continue;
        const Vec3 s(x, y, z);
        out.push_back(c + 0.5 * b.extent().cwiseProduct(s));
      }
    }
  }
  return out;
}

Vec3 cap(const Vec3& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec3(v * (limit / n)) : v;
}

Mat3 world_inverse_inertia(const SimContext& ctx, std::size_t b, const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  return r * ctx.inertia[b].cwiseInverse().asDiagonal() * r.transpose();
}

Vec3 center_of_mass(const SimContext& ctx, std::size_t b, const Pose& pose) {
  return pose.apply(ctx.local_bounds[b].center());
}

void sample_points(const SimContext& ctx, std::size_t b, const Pose& pose, std::vector<Vec3>& out) {
  const auto& local = ctx.sample_points[b];
  out.resize(local.size());
  const Mat3 r = pose.q.toRotationMatrix();
  for (std::size_t i = 0; i < local.size(); ++i) out[i] = r * local[i] + pose.p;
}

double min_sdf(const scene::SdfGrid& grid, const std::vector<Vec3>& pts, std::vector<double>& phi,
               std::size_t* arg) {
  phi.resize(pts.size());
  scene::sample_sdf(grid, pts, phi);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i] < best) {
      best = phi[i];
      if (arg) *arg = i;
    }
  }
  return best;
}

Vec3 surface_normal(const scene::SdfGrid& grid, const Vec3& p) {
  const Vec3 g = scene::sdf_gradient(grid, p, 0.5 * grid.voxel_size());
  const double n = g.norm();
  return n > 1e-9 ? Vec3(g / n) : Vec3::UnitZ();
}

// Moves the gripper one substep toward the command under the rate limits.
void move_gripper(GripperState& g, const Command& cmd, const SimConfig& cfg, double dt) {
  const double pull = std::min(cfg.gripper_gain, 1.0 / dt);
  g.linear_velocity = cap(pull * (cmd.target.p - g.pose.p), cfg.max_linear_speed);
  g.angular_velocity =
      cap(pull * quat_log(cmd.target.q * g.pose.q.conjugate()), cfg.max_angular_speed);
  g.pose = Pose(g.pose.p + dt * g.linear_velocity,
                (quat_exp(dt * g.angular_velocity) * g.pose.q).normalized());
}

// Pushes a held object (and the gripper with it) out of the background.
void resolve_held(WorldState& s, std::size_t b, std::vector<Vec3>& pts, std::vector<double>& phi) {
  const auto& ctx = *s.context;
  const auto& grid = s.scene().sdf;
  for (int pass = 0; pass < 4; ++pass) {
    sample_points(ctx, b, s.bodies[b].pose, pts);
    std::size_t arg = 0;
    const double depth = min_sdf(grid, pts, phi, &arg);
    if (depth >= 0.0) return;
    const Vec3 push = -depth * surface_normal(grid, pts[arg]);
    s.gripper.pose.p += push;
    s.bodies[b].pose.p += push;
  }
}

int integrate_body(WorldState& s, std::size_t b, double dt, std::vector<Vec3>& pts,
                   std::vector<double>& phi, std::vector<Contact>& contacts) {
  const auto& ctx = *s.context;
  const auto& scene = s.scene();
  const auto& obj = scene.objects[b];
  auto& body = s.bodies[b];
  const double mass = obj.properties.mass;
  const double mu = std::sqrt(obj.properties.friction * scene.background_properties.friction);
  const double e = std::max(obj.properties.restitution, scene.background_properties.restitution);
  const Vec3 local_com = ctx.local_bounds[b].center();

  // Semi-implicit Euler about the centre of mass.
  body.linear_velocity += dt * scene.gravity;
  Vec3 com = center_of_mass(ctx, b, body.pose) + dt * body.linear_velocity;
  const Quat q = (quat_exp(dt * body.angular_velocity) * body.pose.q).normalized();
  body.pose = Pose(com - q * local_com, q);

  sample_points(ctx, b, body.pose, pts);
  std::size_t deepest = 0;
  const double depth = min_sdf(scene.sdf, pts, phi, &deepest);
  if (depth >= 0.0) return 0;

  com = center_of_mass(ctx, b, body.pose);
  contacts.clear();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (phi[i] >= 0.0) continue;
    contacts.push_back({pts[i] - com, surface_normal(scene.sdf, pts[i]), phi[i]});
  }
  // Translation-only projection out of the deepest penetration.
  const Vec3 push = -depth * surface_normal(scene.sdf, pts[deepest]);
  body.pose.p += push;

  const Mat3 inv_i = world_inverse_inertia(ctx, b, body.pose.q);
  const double inv_m = 1.0 / mass;
  auto point_velocity = [&](const Vec3& r) {
    return Vec3(body.linear_velocity + body.angular_velocity.cross(r));
  };
  auto effective = [&](const Vec3& r, const Vec3& d) {
    return inv_m + d.dot((inv_i * r.cross(d)).cross(r));
  };
  auto apply = [&](const Vec3& r, const Vec3& j) {
    body.linear_velocity += inv_m * j;
    body.angular_velocity += inv_i * r.cross(j);
  };
  for (auto& c : contacts) {
    const double vn = point_velocity(c.r).dot(c.n);
    c.bounce = vn < -ctx.config.bounce_threshold ? -e * vn : 0.0;
  }
  for (int it = 0; it < ctx.config.contact_iterations; ++it) {
    for (auto& c : contacts) {
      const Vec3 u = point_velocity(c.r);
      const double vn = u.dot(c.n);
      const double dj = (c.bounce - vn) / effective(c.r, c.n);
      const double acc = std::max(0.0, c.acc_n + dj);
      apply(c.r, (acc - c.acc_n) * c.n);
      c.acc_n = acc;

      const Vec3 ut = point_velocity(c.r) - point_velocity(c.r).dot(c.n) * c.n;
      const double speed = ut.norm();
      if (speed < 1e-12) continue;
      const Vec3 t = ut / speed;
      Vec3 acc_t = c.acc_t - (speed / effective(c.r, t)) * t;
      const double limit = mu * c.acc_n;
      if (acc_t.norm() > limit) acc_t *= limit / acc_t.norm();
      apply(c.r, acc_t - c.acc_t);
      c.acc_t = acc_t;
    }
  }
  return static_cast<int>(contacts.size());
}

void check_explosion(const WorldState& s) {
  const double limit = s.context->config.explosion_speed;
  for (std::size_t b = 0; b < s.bodies.size(); ++b) {
    const auto& body = s.bodies[b];
    const double v = body.linear_velocity.norm();
    if (!(v <= limit) || !body.angular_velocity.allFinite() || !body.pose.p.allFinite()) {
      throw Error(ErrorCode::kExplosionDetected,
                  "body " + s.scene().objects[b].name + " reached " + std::to_string(v) + " m/s");
    }
  }
}

}  // namespace

void SimConfig::validate() const {
  if (!(control_dt > 0.0) || substeps < 1 || !(max_linear_speed > 0.0) ||
      !(max_angular_speed > 0.0) || !(gripper_gain > 0.0) || !(attach_distance >= 0.0) ||
      !(jitter >= 0.0) || !(explosion_speed > 0.0) || contact_iterations < 1 ||
      !(reach_factor > 0.0) || sleep_substeps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid simulator configuration");
  }
}

std::shared_ptr<const SimContext> SimContext::make(const scene::SceneModel& scene,
                                                   const SimConfig& config) {
  scene.validate();
  config.validate();
  auto ctx = std::make_shared<SimContext>();
  ctx->scene = std::make_shared<const scene::SceneModel>(scene);
  ctx->config = config;
  for (const auto& obj : scene.objects) {
    const Aabb box = obj.mesh.bounds();
    std::vector<Vec3> pts = box_samples(box);
    const std::size_t n = obj.mesh.vertices.size();
    const std::size_t stride = std::max<std::size_t>(1, (n + config.max_mesh_samples - 1) /
                                                            std::max<std::size_t>(config.max_mesh_samples, 1));
    for (std::size_t i = 0; i < n && config.max_mesh_samples > 0; i += stride) {
      pts.push_back(obj.mesh.vertices[i]);
    }
    const Vec3 ext = box.extent();
    const double m = obj.properties.mass;
    ctx->inertia.emplace_back(m * (ext.y() * ext.y() + ext.z() * ext.z()) / 12.0,
                              m * (ext.x() * ext.x() + ext.z() * ext.z()) / 12.0,
                              m * (ext.x() * ext.x() + ext.y() * ext.y()) / 12.0);
    ctx->inertia.back() = ctx->inertia.back().cwiseMax(1e-12);
    ctx->sample_points.push_back(std::move(pts));
    ctx->local_bounds.push_back(box);
  }
  return ctx;
}

WorldState reset(std::shared_ptr<const SimContext> context, std::uint64_t seed, bool jitter) {
  if (!context || !context->scene || !context->scene->assembled) {
    throw Error(ErrorCode::kUnassembledScene, "reset needs an assembled scene");
  }
  WorldState s;
  s.context = std::move(context);
  const auto& scene = s.scene();
  std::mt19937_64 rng(seed);
  const double half = s.context->config.jitter;
  std::uniform_real_distribution<double> u(-half, half);
  for (const auto& obj : scene.objects) {
    RigidBodyState body;
    body.pose = obj.initial_pose;
    if (jitter && half > 0.0) {
      const double dx = u(rng);
      const double dy = u(rng);
      body.pose.p += Vec3(dx, dy, 0.0);
    }
    s.bodies.push_back(body);
  }
  s.gripper.pose = scene.home;
  return s;
}

StepInfo step(WorldState& s, const Command& cmd) {
  const auto& ctx = *s.context;
  const auto& cfg = ctx.config;
  const auto& scene = s.scene();
  const double dt = cfg.control_dt / cfg.substeps;

  StepInfo info;
  info.feasible = check_feasible(s, cmd).feasible;
  std::vector<Vec3> pts;
  std::vector<double> phi;
  std::vector<Contact> contacts;

  for (int sub = 0; sub < cfg.substeps; ++sub) {
    auto& g = s.gripper;
    move_gripper(g, cmd, cfg, dt);
    g.closed = cmd.close;

    if (g.held_object && !cmd.close) {
      auto& body = s.bodies[*g.held_object];
      const Vec3 r = center_of_mass(ctx, *g.held_object, body.pose) - g.pose.p;
      body.linear_velocity = g.linear_velocity + g.angular_velocity.cross(r);
      body.angular_velocity = g.angular_velocity;
      body.attached = false;
      body.sleeping = false;
      body.rest_count = 0;
      g.held_object.reset();
      info.released = true;
    }
    if (cmd.close && !g.held_object) {
      double best = cfg.attach_distance;
      std::optional<std::size_t> pick;
      for (std::size_t b = 0; b < s.bodies.size(); ++b) {
        const Vec3 local = s.bodies[b].pose.inverse().apply(g.pose.p);
        const double d = (ctx.local_bounds[b].clamp(local) - local).norm();
        if (d <= best) {
          best = d;
          pick = b;
        }
      }
      if (pick) {
        auto& body = s.bodies[*pick];
        body.attached = true;
        body.sleeping = false;
        body.rest_count = 0;
        g.held_object = pick;
        g.held_relative = g.pose.inverse() * body.pose;
        info.attached = true;
      }
    }
    if (g.held_object) {
      const std::size_t b = *g.held_object;
      auto& body = s.bodies[b];
      body.pose = g.pose * g.held_relative;
      resolve_held(s, b, pts, phi);
      const Vec3 r = center_of_mass(ctx, b, body.pose) - g.pose.p;
      body.linear_velocity = g.linear_velocity + g.angular_velocity.cross(r);
      body.angular_velocity = g.angular_velocity;
    }

    info.contacts = 0;
    for (std::size_t b = 0; b < s.bodies.size(); ++b) {
      auto& body = s.bodies[b];
      if (body.attached || body.sleeping) continue;
      info.contacts += integrate_body(s, b, dt, pts, phi, contacts);
      const bool resting = body.linear_velocity.norm() < cfg.sleep_linear_speed &&
                           body.angular_velocity.norm() < cfg.sleep_angular_speed;
      body.rest_count = resting ? body.rest_count + 1 : 0;
      if (body.rest_count >= cfg.sleep_substeps) {
        body.sleeping = true;
        body.linear_velocity.setZero();
        body.angular_velocity.setZero();
      }
    }
    check_explosion(s);
  }
  (void)scene;
  info.held_object = s.gripper.held_object;
  ++s.step;
  return info;
}

std::string_view to_string(Infeasibility reason) {
  switch (reason) {
    case Infeasibility::kNone: return "none";
    case Infeasibility::kWorkspace: return "workspace";
    case Infeasibility::kRateLimit: return "rate-limit";
    case Infeasibility::kCollision: return "collision";
  }
  return "unknown";
}

Feasibility check_feasible(const WorldState& s, const Command& cmd) {
  const auto& cfg = s.context->config;
  const auto& scene = s.scene();
  if (!cmd.target.p.allFinite() || !scene.workspace.contains(cmd.target.p, 0.0)) {
    return {false, Infeasibility::kWorkspace};
  }
  const double reach = cfg.max_linear_speed * cfg.control_dt * cfg.reach_factor;
  if ((cmd.target.p - s.gripper.pose.p).norm() > reach) return {false, Infeasibility::kRateLimit};
  if (scene::sample_sdf(scene.sdf, cmd.target.p) < 0.0) return {false, Infeasibility::kCollision};
  return {};
}

double kinetic_energy(const WorldState& s) {
  const auto& ctx = *s.context;
  double e = 0.0;
  for (std::size_t b = 0; b < s.bodies.size(); ++b) {
    const auto& body = s.bodies[b];
    const Mat3 r = body.pose.q.toRotationMatrix();
    const Vec3 w_local = r.transpose() * body.angular_velocity;
    e += 0.5 * s.scene().objects[b].properties.mass * body.linear_velocity.squaredNorm() +
         0.5 * w_local.dot(ctx.inertia[b].cwiseProduct(w_local));
  }
  return e;
}

std::vector<Vec3> world_sample_points(const WorldState& s, std::size_t body) {
  std::vector<Vec3> pts;
  sample_points(*s.context, body, s.bodies.at(body).pose, pts);
  return pts;
}

double min_body_clearance(const WorldState& s) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> phi;
  for (std::size_t b = 0; b < s.bodies.size(); ++b) {
    best = std::min(best, min_sdf(s.scene().sdf, world_sample_points(s, b), phi, nullptr));
  }
  return best;
}

}  // namespace physworld::sim
