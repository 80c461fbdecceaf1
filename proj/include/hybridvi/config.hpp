#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace hybridvi {

// A run is described by one JSON config file. The schema is validated up
// front: unknown keys anywhere in the document are rejected, and the value
// types of known keys are checked before any computation starts.
struct RunConfig {
  std::string model;  // "tobit" | "tvpvar" | "toy"
  std::uint64_t seed = 1;
  std::string output_dir;
  nlohmann::json raw;

  static RunConfig load(const std::string& path);
  static RunConfig from_json(const nlohmann::json& j);

  bool has(const std::string& section) const { return raw.contains(section); }
  const nlohmann::json& section(const std::string& name) const;

  // Scalar helpers with defaults.
  double get_or(const std::string& section, const std::string& key, double fallback) const;
  int get_int_or(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
  std::string get_str_or(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
};

// Throws std::invalid_argument naming the offending key.
void validate_config(const nlohmann::json& j);

}  // namespace hybridvi
