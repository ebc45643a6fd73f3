#include "physworld/scene.hpp"

#include <cctype>
#include <cmath>
#include <iomanip>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "physworld/error.hpp"

namespace physworld::scene {
namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kFormat, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pose_json(const Pose& p) {
  return {{"position", vec_json(p.p)},
          {"orientation", json::array({p.q.w(), p.q.x(), p.q.y(), p.q.z()})}};
}

Pose json_pose(const json& j) {
  const auto& q = j.at("orientation");
  if (!q.is_array() || q.size() != 4) throw Error(ErrorCode::kFormat, "expected a quaternion");
  Quat quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  const double n = quat.norm();
  if (!(std::abs(n - 1.0) < 1e-6)) throw Error(ErrorCode::kFormat, "quaternion is not unit");
  quat.normalize();
  return Pose(json_vec(j.at("position")), quat);
}

json props_json(const PhysicalProperties& p) {
  return {{"mass", p.mass}, {"friction", p.friction}, {"restitution", p.restitution}};
}

PhysicalProperties json_props(const json& j) {
  PhysicalProperties p{j.at("mass").get<double>(), j.at("friction").get<double>(),
                       j.at("restitution").get<double>()};
  p.validate();
  return p;
}

bool safe_name(const std::string& name) {
  if (name.empty() || name.size() > 128) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

int SceneModel::find(const std::string& name) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void SceneModel::validate() const {
  if (!assembled) throw Error(ErrorCode::kUnassembledScene, "scene has not been assembled");
  if (background.empty()) throw Error(ErrorCode::kUnassembledScene, "scene has no background");
  if (sdf.empty()) throw Error(ErrorCode::kUnassembledScene, "scene has no SDF grid");
  background_properties.validate();
  std::set<std::string> names;
  for (const auto& o : objects) {
    if (!safe_name(o.name)) throw Error(ErrorCode::kInvalidArgument, "bad object name: " + o.name);
    if (!names.insert(o.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate object name: " + o.name);
    }
    if (o.mesh.empty()) throw Error(ErrorCode::kEmptyMesh, "object without mesh: " + o.name);
    o.properties.validate();
  }
  if (!workspace.valid()) throw Error(ErrorCode::kInvalidArgument, "scene workspace is empty");
}

Pose default_home(const SceneModel& scene, double height) {
  Vec3 c = Vec3::Zero();
  if (scene.objects.empty()) {
    const Aabb b = scene.background.bounds();
    c = b.valid() ? Vec3(b.center().x(), b.center().y(), b.max.z()) : Vec3::Zero();
  } else {
    for (const auto& o : scene.objects) c += o.initial_pose.p;
    c /= double(scene.objects.size());
  }
  return Pose(c + Vec3(0.0, 0.0, height), top_down(0.0));
}

void save_scene(const std::filesystem::path& dir, const SceneModel& scene) {
  scene.validate();
  std::filesystem::create_directories(dir / "objects");
  write_obj(dir / "background.obj", scene.background);
  write_sdf(dir / "background.pwsd", scene.sdf);
  json objects = json::array();
  for (const auto& o : scene.objects) {
    const std::string mesh_file = "objects/" + o.name + ".obj";
    write_obj(dir / mesh_file, o.mesh);
    objects.push_back({{"name", o.name},
                       {"category", o.category},
                       {"mesh", mesh_file},
                       {"properties", props_json(o.properties)},
                       {"properties_defaulted", o.properties_defaulted},
                       {"initial_pose", pose_json(o.initial_pose)},
                       {"placement_offset", o.placement_offset}});
  }
  json j = {{"format", "physworld-scene"},
            {"version", 1},
            {"background", {{"mesh", "background.obj"},
                            {"sdf", "background.pwsd"},
                            {"properties", props_json(scene.background_properties)}}},
            {"gravity", vec_json(scene.gravity)},
            {"home", pose_json(scene.home)},
            {"workspace", {{"min", vec_json(scene.workspace.min)},
                           {"max", vec_json(scene.workspace.max)}}},
            {"objects", objects}};
  std::ofstream out(dir / "scene.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "scene.json").string());
  out << std::setw(2) << j << "\n";
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + (dir / "scene.json").string());
}

SceneModel load_scene(const std::filesystem::path& dir) {
  const auto path = dir / "scene.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  SceneModel scene;
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "physworld-scene" || j.value("version", 0) != 1) {
      throw Error(ErrorCode::kFormat, path.string() + ": not a version 1 scene file");
    }
    const auto& bg = j.at("background");
    scene.background = read_obj(dir / bg.at("mesh").get<std::string>());
    scene.sdf = read_sdf(dir / bg.at("sdf").get<std::string>());
    scene.background_properties = json_props(bg.at("properties"));
    scene.gravity = json_vec(j.at("gravity"));
    scene.home = json_pose(j.at("home"));
    scene.workspace = Aabb{json_vec(j.at("workspace").at("min")),
                           json_vec(j.at("workspace").at("max"))};
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.name = o.at("name").get<std::string>();
      if (!safe_name(obj.name)) throw Error(ErrorCode::kFormat, "bad object name: " + obj.name);
      obj.category = o.at("category").get<std::string>();
      obj.mesh = read_obj(dir / o.at("mesh").get<std::string>());
      obj.properties = json_props(o.at("properties"));
      obj.properties_defaulted = o.value("properties_defaulted", false);
      obj.initial_pose = json_pose(o.at("initial_pose"));
      obj.placement_offset = o.value("placement_offset", 0.0);
      scene.objects.push_back(std::move(obj));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) {
      throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
    }
    throw;
  }
  scene.assembled = true;
  scene.validate();
  return scene;
}

}  // namespace physworld::scene
