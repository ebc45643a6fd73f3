#include "physworld/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "physworld/baseline.hpp"
#include "physworld/calibration.hpp"
#include "physworld/error.hpp"
#include "physworld/geometry.hpp"
#include "physworld/placement.hpp"
#include "physworld/registration.hpp"
#include "physworld/rl/checkpoint.hpp"
#include "physworld/scene.hpp"
#include "physworld/sdf.hpp"

namespace physworld::pipeline {
namespace {

using nlohmann::json;

[[noreturn]] void bad_input(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kFormat, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::kFormat, where + ": unknown key '" + key + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::kIo, "missing input file: " + p.string());
}

Vec3 json_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kFormat, where + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
void get_if(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string frame_name(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

Pose to_pose(const RigidTransform& t) { return Pose(t.translation, Quat(t.rotation)); }

// Shared state of one invocation.
struct Context {
  Manifest manifest;
  Overrides overrides;
  Layout layout;
  std::ostream& out;
  std::ofstream log;

  std::uint64_t seed() const { return overrides.seed.value_or(manifest.seed); }

  void note(const std::string& line) {
    out << line << "\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << line << "\n";
    log.flush();
  }
};

// ---------------------------------------------------------------- calibrate

std::vector<fs::path> calibrated_frames(const Context& c) {
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < c.manifest.depth_frames.size(); ++i) {
    out.push_back(c.layout.calibrate() / frame_name("depth", i, ".pwdm"));
  }
  return out;
}

void run_calibrate(Context& c) {
  const auto& m = c.manifest;
  const auto raw = depth::read_depth_map(m.depth_frames.front());
  const auto reference = depth::read_depth_map(m.reference_depth);
  const auto result = depth::fit_scale_shift(raw, reference);
  fs::create_directories(c.layout.calibrate());
  json j = {{"alpha", result.alpha},
            {"beta", result.beta},
            {"inlier_count", result.inlier_count},
            {"final_residual", result.final_residual},
            {"iterations", result.iterations},
            {"residual_history", result.residual_history}};
  write_json(c.layout.calibrate() / "calibration.json", j);
  const auto outputs = calibrated_frames(c);
  for (std::size_t i = 0; i < m.depth_frames.size(); ++i) {
    const auto frame = i == 0 ? raw : depth::read_depth_map(m.depth_frames[i]);
    depth::write_depth_map(outputs[i], depth::apply_calibration(frame, result));
  }
  char line[160];
  std::snprintf(line, sizeof line, "calibrate: alpha %.6f beta %.6f inliers %zu residual %.3g",
                result.alpha, result.beta, result.inlier_count, result.final_residual);
  c.note(line);
}

// -------------------------------------------------------------- build-scene

depth::PointCloud transformed_cloud(const depth::PointCloud& cloud, const RigidTransform& t) {
  depth::PointCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

void run_build_scene(Context& c) {
  const auto& m = c.manifest;
  const SceneConfig config = load_scene_config(m.scene_config);
  const fs::path calibrated = calibrated_frames(c).front();
  if (!fs::exists(calibrated)) {
    throw Error(ErrorCode::kIo, "missing calibrated depth " + calibrated.string() +
                                    " (run the calibrate stage first)");
  }
  const auto depth_map = depth::read_depth_map(calibrated);
  const auto camera_cloud = depth::unproject(depth_map, config.intrinsics);

  // Object id per pixel; -1 for background.
  std::vector<int> owner(depth_map.size(), -1);
  for (std::size_t o = 0; o < m.objects.size(); ++o) {
    const auto mask = depth::read_depth_map(m.objects[o].mask);
    if (mask.width() != depth_map.width() || mask.height() != depth_map.height()) {
      bad_input("mask " + m.objects[o].mask.string() + " does not match the depth resolution");
    }
    for (std::size_t i = 0; i < owner.size(); ++i) {
      if (mask.mask()[i] && owner[i] < 0) owner[i] = static_cast<int>(o);
    }
  }
  std::vector<int> point_owner(camera_cloud.size());
  for (std::size_t i = 0; i < camera_cloud.size(); ++i) {
    const auto& px = camera_cloud.pixels[i];
    point_owner[i] = owner[depth_map.index(static_cast<std::uint32_t>(px.x()),
                                           static_cast<std::uint32_t>(px.y()))];
  }

  // Ground plane in the nominal world frame, then the gravity correction.
  const auto prior_cloud = transformed_cloud(camera_cloud, config.camera_to_world);
  depth::PointCloud ground_candidates;
  for (std::size_t i = 0; i < prior_cloud.size(); ++i) {
    if (point_owner[i] < 0) ground_candidates.points.push_back(prior_cloud.points[i]);
  }
  geometry::RansacOptions ransac;
  ransac.iterations = config.ransac_iterations;
  ransac.inlier_threshold = config.plane_threshold;
  ransac.seed = stage_seed(c.seed(), "build-scene");
  ransac.viewpoint = config.camera_to_world.translation;
  const auto fit = geometry::fit_ground_plane(ground_candidates, ransac);
  const Mat3 align = geometry::gravity_rotation(fit.plane.normal);
  const double tilt = rotation_angle(align);
  RigidTransform camera_to_world{align * config.camera_to_world.rotation,
                                 align * config.camera_to_world.translation};
  camera_to_world.translation.z() -= fit.plane.offset;  // ground at z = 0

  // Background completion and the collision geometry.
  const auto world_cloud = transformed_cloud(camera_cloud, camera_to_world);
  std::vector<bool> is_object(world_cloud.size());
  Aabb bounds;
  for (std::size_t i = 0; i < world_cloud.size(); ++i) {
    is_object[i] = point_owner[i] >= 0;
    if (!is_object[i]) bounds.extend(world_cloud.points[i]);
  }
  if (!bounds.valid()) throw Error(ErrorCode::kEmptyCloud, "no background points");
  bounds.min.z() = std::min(bounds.min.z(), 0.0) - config.plane_threshold;
  bounds.max.z() = std::max(bounds.max.z(), 0.0) + config.plane_threshold;
  geometry::Plane ground;
  const auto completion = geometry::complete_background(world_cloud, is_object, ground, bounds,
                                                        config.intrinsics, camera_to_world);

  scene::SceneModel model;
  model.background = geometry::heightmap_mesh(completion.cloud, config.heightmap_cell);
  model.sdf = scene::voxelize_sdf(model.background, config.voxel, config.sdf_padding);

  const scene::PropertyTable table =
      m.property_table ? scene::PropertyTable::load(*m.property_table) : scene::PropertyTable();
  json report_objects = json::array();
  std::vector<scene::Registration> registrations;
  for (std::size_t o = 0; o < m.objects.size(); ++o) {
    const auto& entry = m.objects[o];
    depth::PointCloud observed;
    for (std::size_t i = 0; i < world_cloud.size(); ++i) {
      if (point_owner[i] == static_cast<int>(o)) observed.points.push_back(world_cloud.points[i]);
    }
    if (observed.empty()) bad_input("object '" + entry.name + "' has no observed depth pixels");
    const TriangleMesh mesh = read_obj(entry.mesh);
    const auto reg = scene::register_mesh(mesh, observed);
    scene::SceneObject obj;
    obj.name = entry.name;
    obj.category = entry.category;
    obj.mesh = scaled(mesh, reg.transform.scale);
    obj.initial_pose = Pose(reg.transform.translation, Quat(reg.transform.rotation));
    const auto lookup = table.lookup(entry.category);
    obj.properties = lookup.properties;
    obj.properties_defaulted = lookup.defaulted;
    model.objects.push_back(std::move(obj));
    registrations.push_back(reg);
  }

  scene::PlacementResult placement;
  if (!model.objects.empty()) {
    std::vector<scene::PlacementObject> items;
    for (const auto& obj : model.objects) items.push_back({&obj.mesh, obj.initial_pose});
    placement = scene::optimize_placement(items, model.sdf);
    for (std::size_t o = 0; o < model.objects.size(); ++o) {
      auto& obj = model.objects[o];
      obj.placement_offset = placement.offsets[o];
      obj.initial_pose.p.z() += placement.offsets[o];
    }
  }
  for (std::size_t o = 0; o < model.objects.size(); ++o) {
    const auto& obj = model.objects[o];
    const auto& reg = registrations[o];
    report_objects.push_back({{"name", obj.name},
                              {"category", obj.category},
                              {"scale", reg.transform.scale},
                              {"yaw", reg.yaw},
                              {"mean_distance", reg.mean_distance},
                              {"icp_iterations", reg.icp_iterations},
                              {"placement_offset", obj.placement_offset},
                              {"properties_defaulted", obj.properties_defaulted}});
  }

  const Aabb bg = model.background.bounds();
  model.workspace = Aabb{Vec3(bg.min.x(), bg.min.y(), std::min(bg.min.z(), 0.0) - 0.05),
                         Vec3(bg.max.x(), bg.max.y(), bg.max.z() + config.workspace_height)};
  model.home = scene::default_home(model);
  model.assembled = true;

  // Target motion: camera-frame object trajectory re-expressed as world motion
  // applied to the registered initial pose.
  std::optional<traj::PoseTrajectory> target;
  if (m.trajectory) {
    const auto camera_traj = traj::read_trajectory(*m.trajectory);
    const int index = model.find(camera_traj.object_name());
    if (index < 0) {
      bad_input("trajectory object '" + camera_traj.object_name() + "' is not in the scene");
    }
    const Pose cam = to_pose(camera_to_world);
    const Pose cam_inv = cam.inverse();
    const Pose first_inv = camera_traj.front().inverse();
    const Pose& start = model.objects[std::size_t(index)].initial_pose;
    std::vector<traj::TrajectoryFrame> frames;
    for (const auto& f : camera_traj.frames()) {
      frames.push_back({f.t, cam * (f.pose * first_inv) * cam_inv * start});
    }
    target = traj::PoseTrajectory(std::move(frames), 0.2, camera_traj.object_name());
  }

  fs::remove_all(c.layout.scene());
  fs::create_directories(c.layout.scene());
  scene::save_scene(c.layout.scene(), model);
  if (target) traj::write_trajectory(c.layout.scene() / "target.pwtj", *target);

  const Quat cq(camera_to_world.rotation);
  json report = {
      {"plane",
       {{"normal", vec_json(fit.plane.normal)},
        {"offset", fit.plane.offset},
        {"inliers", fit.plane.inliers.size()},
        {"candidates", ground_candidates.size()},
        {"best_trial", fit.best_trial},
        {"refined", fit.refined}}},
      {"rotation_angle_rad", tilt},
      {"rotation_angle_deg", tilt * 180.0 / M_PI},
      {"camera_to_world",
       {{"position", vec_json(camera_to_world.translation)},
        {"orientation", json::array({cq.w(), cq.x(), cq.y(), cq.z()})}}},
      {"completion", {{"filled", completion.filled}, {"dropped", completion.dropped}}},
      {"background",
       {{"vertices", model.background.vertices.size()},
        {"triangles", model.background.triangles.size()}}},
      {"sdf",
       {{"voxel", model.sdf.voxel_size()},
        {"dims", model.sdf.dims()}}},
      {"objects", report_objects},
      {"placement",
       {{"initial_loss", placement.initial_loss},
        {"final_loss", placement.final_loss},
        {"steps", placement.steps},
        {"converged", model.objects.empty() || placement.converged}}},
      {"property_table", table.version()}};
  write_json(c.layout.scene() / "build_report.json", report);

  char line[200];
  std::snprintf(line, sizeof line,
                "build-scene: ground inliers %zu/%zu, rotation %.4f deg, %zu objects, "
                "placement loss %.3g",
                fit.plane.inliers.size(), ground_candidates.size(), tilt * 180.0 / M_PI,
                model.objects.size(), placement.final_loss);
  c.note(line);
}

// -------------------------------------------------------------------- task

struct Task {
  scene::SceneModel scene;
  traj::PoseTrajectory target;
  traj::BaselinePlan plan;
  std::size_t object = 0;
  std::shared_ptr<const sim::SimContext> context;

  rl::EnvFactory factory(const rl::EnvConfig& config) const {
    return [this, config] {
      return std::make_unique<rl::ManipulationEnv>(context, object, &target, &plan, config);
    };
  }
};

std::unique_ptr<Task> load_task(const Context& c) {
  const fs::path scene_dir = c.layout.scene();
  if (!fs::exists(scene_dir / "scene.json")) {
    throw Error(ErrorCode::kIo, "missing scene " + (scene_dir / "scene.json").string() +
                                    " (run the build-scene stage first)");
  }
  const fs::path target_path = scene_dir / "target.pwtj";
  if (!fs::exists(target_path)) {
    bad_input("scene has no target trajectory; the manifest must name a trajectory file");
  }
  auto task = std::make_unique<Task>();
  task->scene = scene::load_scene(scene_dir);
  task->target = traj::read_trajectory(target_path);
  const int index = task->scene.find(task->target.object_name());
  if (index < 0) {
    bad_input("trajectory object '" + task->target.object_name() + "' is not in the scene");
  }
  task->object = static_cast<std::size_t>(index);
  const auto& obj = task->scene.objects[task->object];
  auto grasp = traj::propose_grasp(obj.mesh, obj.initial_pose);
  grasp.grasp.p += c.manifest.task.grasp_offset;
  task->plan = traj::make_baseline(grasp, task->target, task->scene.home, c.manifest.task.phases);
  task->context = sim::SimContext::make(task->scene);
  return task;
}

rl::EnvConfig env_config(const rl::RewardWeights& weights, rl::ActionMode mode) {
  rl::EnvConfig config;
  config.weights = weights;
  config.mode = mode;
  return config;
}

// ------------------------------------------------------------------- train

void run_train(Context& c) {
  const auto task = load_task(c);
  rl::PpoConfig config = c.manifest.training;
  config.seed = stage_seed(c.seed(), "train");
  if (c.overrides.iterations) config.iterations = *c.overrides.iterations;
  config.validate();
  const auto factory = task->factory(env_config(c.manifest.rewards, c.manifest.mode));

  rl::TrainingResult result;
  if (config.iterations == 0) {
    result.params = rl::PolicyParameters::initialize(config.seed, config.init_log_std);
  } else {
    result = rl::ppo_train(factory, config, [&](const rl::IterationStats& s) {
      if (s.iteration % 10 == 0 || s.iteration + 1 == config.iterations) {
        char line[200];
        std::snprintf(line, sizeof line,
                      "train: iteration %d mean return %.6f r_trk %.4f success %.2f",
                      s.iteration, s.mean_return, s.mean_r_trk, s.success_rate);
        c.note(line);
      }
    });
  }
  fs::create_directories(c.layout.train());
  rl::save_checkpoint(c.layout.train() / "policy.pwpl",
                      {result.params, config, c.manifest.rewards, c.manifest.mode});
  rl::write_curve_csv(c.layout.train() / "curve.csv", result.curve);
  c.note("train: " + std::to_string(result.curve.size()) + " iterations written to " +
         c.layout.train().string());
}

// ---------------------------------------------------------------- evaluate

void write_pose(std::ostream& out, const Pose& p) {
  const auto f = p.flat();
  for (double v : f) out << ' ' << v;
}

void run_evaluate(Context& c) {
  const fs::path policy = c.layout.train() / "policy.pwpl";
  if (!fs::exists(policy)) {
    throw Error(ErrorCode::kIo, "missing policy " + policy.string() + " (run the train stage first)");
  }
  const auto checkpoint = rl::load_checkpoint(policy);
  const auto task = load_task(c);
  const std::size_t episodes = c.overrides.episodes.value_or(c.manifest.episodes);
  const std::uint64_t base_seed = stage_seed(c.seed(), "evaluate");
  const rl::EnvConfig config = env_config(checkpoint.weights, checkpoint.mode);
  const auto report = rl::evaluate(checkpoint.params, task->factory(config), episodes, base_seed);

  fs::remove_all(c.layout.evaluate());
  fs::create_directories(c.layout.evaluate());
  json successes = json::array();
  for (bool s : report.successes) successes.push_back(s);
  write_json(c.layout.evaluate() / "report.json",
             {{"episodes", report.episodes},
              {"success_rate", report.success_rate},
              {"mean_position_error", report.mean_position_error},
              {"mean_rotation_error", report.mean_rotation_error},
              {"mean_episode_reward", report.mean_episode_reward},
              {"successes", successes},
              {"base_seed", base_seed},
              {"mode", checkpoint.mode == rl::ActionMode::kResidual ? "residual" : "scratch"}});

  // Per-episode logs in the trajectory line format with extra columns.
  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "episode,success,position_error,rotation_error,reward\n";
  for (std::size_t i = 0; i < episodes; ++i) {
    rl::ManipulationEnv env(task->context, task->object, &task->target, &task->plan, config);
    rl::Observation obs = env.reset(base_seed + i);
    std::ostringstream log;
    log << std::setprecision(17);
    log << "# PWTJ v1 object=" << task->target.object_name() << "\n";
    log << "# episode " << i << " seed " << base_seed + i << "\n";
    log << "# columns: t object(7) gripper(7) target(7) closed feasible reward\n";
    auto row = [&](std::size_t t, double reward) {
      const auto& w = env.world();
      const std::size_t frame = std::min(t, task->plan.steps() - 1);
      log << t;
      write_pose(log, w.bodies[task->object].pose);
      write_pose(log, w.gripper.pose);
      write_pose(log, task->target.pose(std::size_t(task->plan.target_frame[frame])));
      log << ' ' << (w.gripper.closed ? 1 : 0) << ' ' << (env.last_feasible() ? 1 : 0) << ' '
          << reward << "\n";
    };
    row(0, 0.0);
    double total = 0.0;
    for (;;) {
      const auto r = env.step(rl::actor_mean(checkpoint.params, obs));
      total += r.reward;
      obs = r.obs;
      row(env.step_index(), r.reward);
      if (r.done) {
        csv << i << ',' << (r.success ? 1 : 0) << ',' << r.final_position_error << ','
            << r.final_rotation_error << ',' << total << "\n";
        break;
      }
    }
    write_text(c.layout.evaluate() / frame_name("episode", i, ".pwtj"), log.str());
  }
  write_text(c.layout.evaluate() / "episodes.csv", csv.str());

  char line[200];
  std::snprintf(line, sizeof line,
                "evaluate: success %.2f over %zu episodes, mean position error %.4f m",
                report.success_rate, report.episodes, report.mean_position_error);
  c.note(line);
}

// ------------------------------------------------------------------ replay

void run_replay(Context& c) {
  const fs::path log_path = c.overrides.log.value_or(c.layout.evaluate() / "episode_000.pwtj");
  std::ifstream in(log_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open episode log: " + log_path.string());
  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "t";
  for (const char* who : {"object", "gripper", "target"}) {
    for (const char* f : {"px", "py", "pz", "qw", "qx", "qy", "qz"}) csv << ',' << who << '_' << f;
  }
  csv << ",closed,feasible,reward,position_error,rotation_error\n";
  std::string line;
  std::size_t line_no = 0, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> v;
    for (double x; ss >> x;) v.push_back(x);
    if (v.size() != 25 || !ss.eof()) {
      throw Error(ErrorCode::kFormat,
                  log_path.string() + ":" + std::to_string(line_no) + ": expected 25 columns");
    }
    const Pose object(Vec3(v[1], v[2], v[3]), Quat(v[4], v[5], v[6], v[7]));
    const Pose target(Vec3(v[15], v[16], v[17]), Quat(v[18], v[19], v[20], v[21]));
    csv << static_cast<long>(v[0]);
    for (std::size_t k = 1; k < v.size(); ++k) csv << ',' << v[k];
    csv << ',' << (object.p - target.p).norm() << ',' << quat_angle(object.q, target.q) << "\n";
    ++rows;
  }
  fs::create_directories(c.layout.replay());
  const fs::path out = c.layout.replay() / (log_path.stem().string() + ".csv");
  write_text(out, csv.str());
  c.note("replay: " + std::to_string(rows) + " rows written to " + out.string());
}

// ------------------------------------------------------------------ stages

struct Stage {
  std::string name;
  std::function<std::vector<fs::path>(const Context&)> inputs;
  std::function<std::vector<fs::path>(const Context&)> outputs;
  std::function<void(Context&)> run;
};

std::vector<fs::path> scene_outputs(const Context& c) {
  std::vector<fs::path> out{c.layout.scene() / "scene.json", c.layout.scene() / "build_report.json"};
  if (c.manifest.trajectory) out.push_back(c.layout.scene() / "target.pwtj");
  return out;
}

const std::vector<Stage>& stages() {
  static const std::vector<Stage> all = {
      {"calibrate",
       [](const Context& c) {
         auto in = c.manifest.depth_frames;
         in.push_back(c.manifest.reference_depth);
         return in;
       },
       [](const Context& c) {
         auto out = calibrated_frames(c);
         out.push_back(c.layout.calibrate() / "calibration.json");
         return out;
       },
       run_calibrate},
      {"build-scene",
       [](const Context& c) {
         const auto& m = c.manifest;
         std::vector<fs::path> in{calibrated_frames(c).front(), m.scene_config, m.path};
         for (const auto& o : m.objects) {
           in.push_back(o.mesh);
           in.push_back(o.mask);
         }
         if (m.trajectory) in.push_back(*m.trajectory);
         if (m.property_table) in.push_back(*m.property_table);
         return in;
       },
       scene_outputs, run_build_scene},
      {"train",
       [](const Context& c) {
         auto in = scene_outputs(c);
         in.push_back(c.manifest.path);
         return in;
       },
       [](const Context& c) {
         return std::vector<fs::path>{c.layout.train() / "policy.pwpl", c.layout.train() / "curve.csv"};
       },
       run_train},
      {"evaluate",
       [](const Context& c) {
         auto in = scene_outputs(c);
         in.push_back(c.layout.train() / "policy.pwpl");
         in.push_back(c.manifest.path);
         return in;
       },
       [](const Context& c) {
         return std::vector<fs::path>{c.layout.evaluate() / "report.json",
                                      c.layout.evaluate() / "episodes.csv"};
       },
       run_evaluate},
  };
  return all;
}

bool up_to_date(const Stage& stage, const Context& c) {
  fs::file_time_type newest_input = fs::file_time_type::min();
  for (const auto& p : stage.inputs(c)) {
    if (!fs::exists(p)) return false;
    newest_input = std::max(newest_input, fs::last_write_time(p));
  }
  for (const auto& p : stage.outputs(c)) {
    if (!fs::exists(p) || fs::last_write_time(p) < newest_input) return false;
  }
  return true;
}

bool stage_enabled(const Manifest& m, const std::string& name) {
  if (name == "calibrate") return m.run_calibrate;
  if (name == "build-scene") return m.run_build_scene;
  if (name == "train") return m.run_train;
  return m.run_evaluate;
}

void run_stage(const Stage& stage, Context& c) {
  if (c.overrides.resume && up_to_date(stage, c)) {
    c.note(stage.name + ": up to date, skipped");
    return;
  }
  c.note(stage.name + ": start");
  stage.run(c);
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  std::uint64_t z = seed ^ fnv1a(stage);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SceneConfig load_scene_config(const fs::path& path) {
  const json j = read_json(path);
  SceneConfig c;
  try {
    check_keys(j,
               {"intrinsics", "camera_to_world", "heightmap_cell", "voxel", "sdf_padding",
                "plane_threshold", "ransac_iterations", "workspace_height"},
               path.string());
    const auto& k = j.at("intrinsics");
    check_keys(k, {"fx", "fy", "cx", "cy"}, "intrinsics");
    c.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>()};
    if (j.contains("camera_to_world")) {
      const auto& t = j.at("camera_to_world");
      check_keys(t, {"position", "orientation"}, "camera_to_world");
      const auto& q = t.at("orientation");
      if (!q.is_array() || q.size() != 4) {
        throw Error(ErrorCode::kFormat, "camera_to_world.orientation must be [w, x, y, z]");
      }
      const Quat quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
      if (std::abs(quat.norm() - 1.0) > 1e-6) {
        throw Error(ErrorCode::kFormat, "camera_to_world.orientation is not a unit quaternion");
      }
      c.camera_to_world = {quat.toRotationMatrix(), json_vec3(t.at("position"), "position")};
    }
    get_if(j, "heightmap_cell", c.heightmap_cell);
    get_if(j, "voxel", c.voxel);
    get_if(j, "sdf_padding", c.sdf_padding);
    get_if(j, "plane_threshold", c.plane_threshold);
    get_if(j, "ransac_iterations", c.ransac_iterations);
    get_if(j, "workspace_height", c.workspace_height);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  c.intrinsics.validate();
  if (!(c.heightmap_cell > 0.0) || !(c.voxel > 0.0) || !(c.sdf_padding >= 0.0) ||
      !(c.plane_threshold > 0.0) || c.ransac_iterations < 1 || !(c.workspace_height > 0.0)) {
    throw Error(ErrorCode::kFormat, path.string() + ": reconstruction settings out of range");
  }
  return c;
}

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  Manifest m;
  m.path = fs::absolute(path).lexically_normal();
  const fs::path base = m.path.parent_path();
  try {
    check_keys(j,
               {"format", "version", "seed", "output", "scene_config", "depth", "objects",
                "trajectory", "property_table", "task", "training", "rewards", "evaluation",
                "stages"},
               path.string());
    if (j.value("format", "") != "physworld-manifest" || j.value("version", 0) != 1) {
      throw Error(ErrorCode::kFormat, path.string() + ": not a version 1 physworld manifest");
    }
    m.seed = j.value("seed", std::uint64_t{0});
    m.output = resolve(base, j.value("output", "out"));
    m.scene_config = resolve(base, j.at("scene_config").get<std::string>());
    const auto& d = j.at("depth");
    check_keys(d, {"frames", "reference"}, "depth");
    for (const auto& f : d.at("frames")) m.depth_frames.push_back(resolve(base, f.get<std::string>()));
    if (m.depth_frames.empty()) throw Error(ErrorCode::kFormat, "depth.frames is empty");
    m.reference_depth = resolve(base, d.at("reference").get<std::string>());
    std::set<std::string> names;
    for (const auto& o : j.value("objects", json::array())) {
      check_keys(o, {"name", "category", "mesh", "mask"}, "objects[]");
      ObjectEntry e{o.at("name").get<std::string>(), o.value("category", ""),
                    resolve(base, o.at("mesh").get<std::string>()),
                    resolve(base, o.at("mask").get<std::string>())};
      if (!names.insert(e.name).second) {
        throw Error(ErrorCode::kFormat, "duplicate object name '" + e.name + "'");
      }
      m.objects.push_back(std::move(e));
    }
    if (j.contains("trajectory")) m.trajectory = resolve(base, j.at("trajectory").get<std::string>());
    if (j.contains("property_table")) {
      m.property_table = resolve(base, j.at("property_table").get<std::string>());
    }
    if (j.contains("task")) {
      const auto& t = j.at("task");
      check_keys(t, {"grasp_offset", "approach", "descend", "track", "hold"}, "task");
      if (t.contains("grasp_offset")) m.task.grasp_offset = json_vec3(t.at("grasp_offset"), "grasp_offset");
      get_if(t, "approach", m.task.phases.approach);
      get_if(t, "descend", m.task.phases.descend);
      get_if(t, "track", m.task.phases.track);
      get_if(t, "hold", m.task.phases.hold);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t,
                 {"mode", "iterations", "num_envs", "rollout_steps", "minibatch", "epochs",
                  "learning_rate", "clip", "gae_lambda", "gamma", "entropy_coef", "value_coef",
                  "max_grad_norm", "init_log_std", "threads"},
                 "training");
      auto& p = m.training;
      const std::string mode = t.value("mode", "residual");
      if (mode == "residual") {
        m.mode = rl::ActionMode::kResidual;
      } else if (mode == "scratch") {
        m.mode = rl::ActionMode::kScratch;
      } else {
        throw Error(ErrorCode::kFormat, "training.mode must be residual or scratch");
      }
      get_if(t, "iterations", p.iterations);
      get_if(t, "num_envs", p.num_envs);
      get_if(t, "rollout_steps", p.rollout_steps);
      get_if(t, "minibatch", p.minibatch);
      get_if(t, "epochs", p.epochs);
      get_if(t, "learning_rate", p.learning_rate);
      get_if(t, "clip", p.clip);
      get_if(t, "gae_lambda", p.gae_lambda);
      get_if(t, "gamma", p.gamma);
      get_if(t, "entropy_coef", p.entropy_coef);
      get_if(t, "value_coef", p.value_coef);
      get_if(t, "max_grad_norm", p.max_grad_norm);
      get_if(t, "init_log_std", p.init_log_std);
      get_if(t, "threads", p.threads);
    }
    if (j.contains("rewards")) {
      const auto& r = j.at("rewards");
      check_keys(r, {"w_pos", "k_pos", "w_ori", "k_ori", "w_grasp", "grasp_distance", "w_plan"},
                 "rewards");
      auto& w = m.rewards;
      get_if(r, "w_pos", w.w_pos);
      get_if(r, "k_pos", w.k_pos);
      get_if(r, "w_ori", w.w_ori);
      get_if(r, "k_ori", w.k_ori);
      get_if(r, "w_grasp", w.w_grasp);
      get_if(r, "grasp_distance", w.grasp_distance);
      get_if(r, "w_plan", w.w_plan);
    }
    if (j.contains("evaluation")) {
      check_keys(j.at("evaluation"), {"episodes"}, "evaluation");
      get_if(j.at("evaluation"), "episodes", m.episodes);
    }
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      check_keys(s, {"calibrate", "build-scene", "train", "evaluate"}, "stages");
      get_if(s, "calibrate", m.run_calibrate);
      get_if(s, "build-scene", m.run_build_scene);
      get_if(s, "train", m.run_train);
      get_if(s, "evaluate", m.run_evaluate);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  try {
    m.training.validate();
    m.rewards.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }

  require_file(m.scene_config);
  for (const auto& f : m.depth_frames) require_file(f);
  require_file(m.reference_depth);
  for (const auto& o : m.objects) {
    require_file(o.mesh);
    require_file(o.mask);
  }
  if (m.trajectory) require_file(*m.trajectory);
  if (m.property_table) require_file(*m.property_table);
  return m;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kExplosionDetected:
    case ErrorCode::kStepOutOfRange:
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNonUnitNormal:
      return 1;
    default:
      return 2;
  }
}

int run_command(const std::string& command, const fs::path& manifest_path,
                const Overrides& overrides, std::ostream& out, std::ostream& err) {
  static const std::set<std::string> known{"calibrate", "build-scene", "train",
                                           "evaluate",  "run",         "replay"};
  if (!known.count(command)) {
    err << "error: unknown command '" << command << "'\n";
    return 2;
  }
  std::unique_ptr<Context> c;
  try {
    Manifest m = load_manifest(manifest_path);
    Layout layout{overrides.out ? fs::absolute(*overrides.out).lexically_normal() : m.output};
    fs::create_directories(layout.root);
    c.reset(new Context{std::move(m), overrides, layout, out, {}});
    c->log.open(layout.log(), std::ios::app);
    if (!c->log) throw Error(ErrorCode::kIo, "cannot write log " + layout.log().string());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  std::string current = command;
  try {
    if (command == "replay") {
      run_replay(*c);
    } else {
      for (const auto& stage : stages()) {
        if (command == "run" ? !stage_enabled(c->manifest, stage.name) : stage.name != command) {
          continue;
        }
        current = stage.name;
        run_stage(stage, *c);
      }
      if (command == "run") c->note("run: complete, outputs in " + c->layout.root.string());
    }
  } catch (const Error& e) {
    err << "error: stage " << current << " failed: " << e.what() << "\n";
    c->log << "stage " << current << " failed: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: stage " << current << " failed: " << e.what() << "\n";
    c->log << "stage " << current << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace physworld::pipeline
