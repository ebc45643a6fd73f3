#include "physworld/properties.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "physworld/error.hpp"

namespace physworld::scene {
namespace {

// Generated from data/physical_properties.json at configure time.
constexpr const char* kBuiltinTable =
#include "physical_properties.inc"
    ;

std::string normalize(const std::string& category) {
  std::string out;
  for (char c : category) {
    if (c == ' ' || c == '-') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  const auto first = out.find_first_not_of('_');
  if (first == std::string::npos) return {};
  return out.substr(first, out.find_last_not_of('_') - first + 1);
}

PhysicalProperties parse_entry(const nlohmann::json& j, const std::string& where) {
  PhysicalProperties p;
  try {
    p.mass = j.at("mass").get<double>();
    p.friction = j.at("friction").get<double>();
    p.restitution = j.at("restitution").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, where + ": " + e.what());
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, where + ": " + e.what());
  }
  return p;
}

}  // namespace

void PhysicalProperties::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorCode::kInvalidArgument, "mass must be > 0");
  }
  if (!(friction >= 0.0) || !std::isfinite(friction)) {
    throw Error(ErrorCode::kInvalidArgument, "friction must be >= 0");
  }
  if (!(restitution >= 0.0 && restitution <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "restitution must lie in [0, 1]");
  }
}

PropertyTable::PropertyTable() { *this = parse(kBuiltinTable); }

PropertyTable PropertyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open property table: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PropertyTable PropertyTable::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("property table: ") + e.what());
  }
  PropertyTable table(nullptr);
  if (!j.is_object() || !j.contains("categories") || !j["categories"].is_object()) {
    throw Error(ErrorCode::kFormat, "property table: missing \"categories\" object");
  }
  table.version_ = j.value("version", std::string("unversioned"));
  if (j.contains("default")) table.fallback_ = parse_entry(j["default"], "default");
  for (const auto& [name, entry] : j["categories"].items()) {
    const std::string key = normalize(name);
    if (key.empty()) throw Error(ErrorCode::kFormat, "property table: empty category name");
    table.entries_[key] = parse_entry(entry, name);
  }
  return table;
}

PropertyLookup PropertyTable::lookup(const std::string& category) const {
  const auto it = entries_.find(normalize(category));
  if (it == entries_.end()) return {fallback_, true};
  return {it->second, false};
}

}  // namespace physworld::scene
