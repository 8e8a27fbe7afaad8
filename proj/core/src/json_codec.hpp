#pragma once

// Private JSON mapping for the scenario schema. Field names follow the
// domain types in lower_snake_case.

#include <string>

#include "json.hpp"
#include "vsf/error.hpp"
#include "vsf/scenario.hpp"

namespace vsf::codec {

using nlohmann::json;

[[noreturn]] inline void malformed(const std::string& path, const std::string& detail) {
  throw Error(ErrorCode::MalformedFile, "at " + path + ": " + detail);
}

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) malformed(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) malformed(path + "." + key, "missing field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) malformed(path, "expected a number");
  return j.get<double>();
}

inline double number(const json& j, const char* key, const std::string& path) {
  return number(field(j, key, path), path + "." + key);
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) malformed(path, "expected an array");
  return j;
}

inline std::string str(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) malformed(path + "." + key, "expected a string");
  return v.get<std::string>();
}

json to_json(Vec2 p);
json to_json(const Pose2D& p);
json to_json(const TrajectorySample& s);
json to_json(const Trajectory& t);
json to_json(const EgoState& e);
json to_json(const Agent& a);
json to_json(const MapContext& m);
json to_json(const CameraModel& c);
json to_json(const Scenario& s);

Vec2 vec2_from(const json& j, const std::string& path);
Pose2D pose_from(const json& j, const std::string& path);
TrajectorySample sample_from(const json& j, const std::string& path);
Trajectory trajectory_from(const json& j, const std::string& path);
EgoState ego_from(const json& j, const std::string& path);
Agent agent_from(const json& j, const std::string& path);
MapContext map_from(const json& j, const std::string& path);
CameraModel camera_from(const json& j, const std::string& path);
Scenario scenario_from(const json& j, const std::string& path);

json parse_document(const std::string& text);

}  // namespace vsf::codec
