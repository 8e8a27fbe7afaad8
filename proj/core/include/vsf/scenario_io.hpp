#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

/// Parses and validates a scenario file. Throws MalformedFile or InvariantViolation.
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
std::vector<Scenario> parse_scenarios(const std::string& text);

void save_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios);
std::string serialize_scenarios(const std::vector<Scenario>& scenarios);

/// Per-record outcome for callers that must keep going past bad records.
struct ScenarioLoadResult {
  std::string id;  // best effort when the record is broken
  std::optional<Scenario> scenario;
  std::string error;
};

/// Only a file that fails to parse as a whole throws; bad records become errors.
std::vector<ScenarioLoadResult> load_scenarios_lenient(const std::filesystem::path& path);

/// Trajectory file: {"params": {...}, "trajectories": [...]}; params are echoed verbatim as JSON text.
struct TrajectoryFile {
  std::string params_json{"{}"};
  std::vector<Trajectory> trajectories;
};

TrajectoryFile load_trajectory_file(const std::filesystem::path& path);
void save_trajectory_file(const std::filesystem::path& path, const TrajectoryFile& file);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace vsf
