#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>

namespace physworld::scene {

struct PhysicalProperties {
  double mass = 0.2;         // kg
  double friction = 0.5;     // Coulomb coefficient
  double restitution = 0.1;  // [0, 1]

  void validate() const;
  friend bool operator==(const PhysicalProperties&, const PhysicalProperties&) = default;
};

struct PropertyLookup {
  PhysicalProperties properties;
  bool defaulted = false;
};

// Category -> properties table loaded from a JSON file.
class PropertyTable {
 public:
  PropertyTable();  // built-in copy of data/physical_properties.json
  static PropertyTable load(const std::filesystem::path& path);

  // Case-insensitive; spaces and dashes match underscores.
  PropertyLookup lookup(const std::string& category) const;
  const std::string& version() const { return version_; }
  const PhysicalProperties& fallback() const { return fallback_; }
  std::size_t size() const { return entries_.size(); }

 private:
  explicit PropertyTable(std::nullptr_t) {}
  static PropertyTable parse(const std::string& text);

  std::string version_;
  PhysicalProperties fallback_;
  std::map<std::string, PhysicalProperties> entries_;
};

}  // namespace physworld::scene
