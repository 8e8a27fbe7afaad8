#include "vsf/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "json_codec.hpp"

namespace vsf {

namespace codec {

namespace {

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

json points_to_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(to_json(p));
  return arr;
}

std::vector<Vec2> points_from(const json& j, const std::string& path) {
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i) out.push_back(vec2_from(j[i], idx(path, i)));
  return out;
}

json track_to_json(const std::vector<TrajectorySample>& track) {
  json arr = json::array();
  for (const auto& s : track) arr.push_back(to_json(s));
  return arr;
}

std::vector<TrajectorySample> track_from(const json& j, const std::string& path) {
  std::vector<TrajectorySample> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i) out.push_back(sample_from(j[i], idx(path, i)));
  return out;
}

DrivingCommand command_from(const std::string& s, const std::string& path) {
  if (s == "left") return DrivingCommand::Left;
  if (s == "forward") return DrivingCommand::Forward;
  if (s == "right") return DrivingCommand::Right;
  malformed(path, "unknown command '" + s + "'");
}

LightState light_from(const std::string& s, const std::string& path) {
  if (s == "red") return LightState::Red;
  if (s == "yellow") return LightState::Yellow;
  if (s == "green") return LightState::Green;
  malformed(path, "unknown light state '" + s + "'");
}

json agents_to_json(const std::vector<Agent>& agents) {
  json arr = json::array();
  for (const auto& a : agents) arr.push_back(to_json(a));
  return arr;
}

std::vector<Agent> agents_from(const json& j, const std::string& path) {
  std::vector<Agent> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i) out.push_back(agent_from(j[i], idx(path, i)));
  return out;
}

}  // namespace

json to_json(Vec2 p) { return json::array({p.x, p.y}); }

json to_json(const Pose2D& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

json to_json(const TrajectorySample& s) { return {{"t", s.t}, {"pose", to_json(s.pose)}, {"speed", s.speed}}; }

json to_json(const Trajectory& t) {
  return {{"dt", t.dt}, {"horizon", t.horizon()}, {"samples", track_to_json(t.samples)}};
}

json to_json(const EgoState& e) {
  return {{"pose", to_json(e.pose)},
          {"speed", e.speed},
          {"accel", e.accel},
          {"command", std::string(to_string(e.command))}};
}

json to_json(const Agent& a) {
  return {{"id", a.id}, {"length", a.length}, {"width", a.width}, {"track", track_to_json(a.track)}};
}

json to_json(const MapContext& m) {
  json drivable = json::array();
  for (const auto& poly : m.drivable) drivable.push_back(points_to_json(poly));
  json lanes = json::array();
  for (const auto& lane : m.lanes) {
    lanes.push_back({{"centerline", points_to_json(lane.centerline)},
                     {"direction", lane.direction},
                     {"half_width", lane.half_width}});
  }
  json lights = json::array();
  for (const auto& tl : m.traffic_lights) {
    json timeline = json::array();
    for (const auto& ph : tl.state_timeline) {
      timeline.push_back({{"t", ph.t}, {"state", std::string(to_string(ph.state))}});
    }
    lights.push_back({{"stop_line", json::array({to_json(tl.stop_line.a), to_json(tl.stop_line.b)})},
                      {"state_timeline", timeline}});
  }
  return {{"drivable", drivable}, {"lanes", lanes}, {"traffic_lights", lights}, {"route", points_to_json(m.route)}};
}

json to_json(const CameraModel& c) {
  const auto& e = c.extrinsic;
  return {{"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"width", c.width},
          {"height", c.height},
          {"extrinsic",
           {{"x", e.x}, {"y", e.y}, {"z", e.z}, {"yaw", e.yaw}, {"pitch", e.pitch}, {"roll", e.roll}}}};
}

json to_json(const Scenario& s) {
  json j = {{"id", s.id},
            {"ego", to_json(s.ego)},
            {"ego_history", to_json(s.ego_history)},
            {"agents", agents_to_json(s.agents)},
            {"map", to_json(s.map)},
            {"camera", to_json(s.camera)}};
  if (s.stage2) {
    json s2 = {{"ego", to_json(s.stage2->ego)},
               {"agents", agents_to_json(s.stage2->agents)},
               {"map", to_json(s.stage2->map)}};
    if (s.stage2->ego_history) s2["ego_history"] = to_json(*s.stage2->ego_history);
    j["stage2"] = std::move(s2);
  }
  return j;
}

Vec2 vec2_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) malformed(path, "expected [x, y]");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

Pose2D pose_from(const json& j, const std::string& path) {
  return {number(j, "x", path), number(j, "y", path), number(j, "heading", path)};
}

TrajectorySample sample_from(const json& j, const std::string& path) {
  return {number(j, "t", path), pose_from(field(j, "pose", path), path + ".pose"), number(j, "speed", path)};
}

Trajectory trajectory_from(const json& j, const std::string& path) {
  Trajectory t;
  t.dt = number(j, "dt", path);
  t.samples = track_from(field(j, "samples", path), path + ".samples");
  if (j.contains("horizon") && !t.samples.empty()) {
    const double declared = number(j, "horizon", path);
    if (std::abs(declared - t.horizon()) > 1e-6) {
      throw Error(ErrorCode::InvariantViolation, path + ".horizon does not match sample span");
    }
  }
  return t;
}

EgoState ego_from(const json& j, const std::string& path) {
  EgoState e;
  e.pose = pose_from(field(j, "pose", path), path + ".pose");
  e.speed = number(j, "speed", path);
  e.accel = number(j, "accel", path);
  e.command = command_from(str(j, "command", path), path + ".command");
  return e;
}

Agent agent_from(const json& j, const std::string& path) {
  Agent a;
  a.id = str(j, "id", path);
  a.length = number(j, "length", path);
  a.width = number(j, "width", path);
  a.track = track_from(field(j, "track", path), path + ".track");
  return a;
}

MapContext map_from(const json& j, const std::string& path) {
  MapContext m;
  const json& drivable = array(field(j, "drivable", path), path + ".drivable");
  for (std::size_t i = 0; i < drivable.size(); ++i) {
    m.drivable.push_back(points_from(drivable[i], idx(path + ".drivable", i)));
  }
  const json& lanes = array(field(j, "lanes", path), path + ".lanes");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const std::string p = idx(path + ".lanes", i);
    Lane lane;
    lane.centerline = points_from(field(lanes[i], "centerline", p), p + ".centerline");
    const json& dir = array(field(lanes[i], "direction", p), p + ".direction");
    for (std::size_t k = 0; k < dir.size(); ++k) lane.direction.push_back(number(dir[k], idx(p + ".direction", k)));
    lane.half_width = number(lanes[i], "half_width", p);
    m.lanes.push_back(std::move(lane));
  }
  const json& lights = array(field(j, "traffic_lights", path), path + ".traffic_lights");
  for (std::size_t i = 0; i < lights.size(); ++i) {
    const std::string p = idx(path + ".traffic_lights", i);
    TrafficLight tl;
    const auto pts = points_from(field(lights[i], "stop_line", p), p + ".stop_line");
    if (pts.size() != 2) malformed(p + ".stop_line", "expected two endpoints");
    tl.stop_line = {pts[0], pts[1]};
    const json& tlj = array(field(lights[i], "state_timeline", p), p + ".state_timeline");
    for (std::size_t k = 0; k < tlj.size(); ++k) {
      const std::string pp = idx(p + ".state_timeline", k);
      tl.state_timeline.push_back({number(tlj[k], "t", pp), light_from(str(tlj[k], "state", pp), pp + ".state")});
    }
    m.traffic_lights.push_back(std::move(tl));
  }
  m.route = points_from(field(j, "route", path), path + ".route");
  return m;
}

CameraModel camera_from(const json& j, const std::string& path) {
  CameraModel c;
  c.fx = number(j, "fx", path);
  c.fy = number(j, "fy", path);
  c.cx = number(j, "cx", path);
  c.cy = number(j, "cy", path);
  c.width = static_cast<int>(number(j, "width", path));
  c.height = static_cast<int>(number(j, "height", path));
  const std::string p = path + ".extrinsic";
  const json& e = field(j, "extrinsic", path);
  c.extrinsic = {number(e, "x", p),   number(e, "y", p),     number(e, "z", p),
                 number(e, "yaw", p), number(e, "pitch", p), number(e, "roll", p)};
  return c;
}

Scenario scenario_from(const json& j, const std::string& path) {
  Scenario s;
  s.id = str(j, "id", path);
  s.ego = ego_from(field(j, "ego", path), path + ".ego");
  s.ego_history = trajectory_from(field(j, "ego_history", path), path + ".ego_history");
  s.agents = agents_from(field(j, "agents", path), path + ".agents");
  s.map = map_from(field(j, "map", path), path + ".map");
  s.camera = camera_from(field(j, "camera", path), path + ".camera");
  if (auto it = j.find("stage2"); it != j.end() && !it->is_null()) {
    const std::string p = path + ".stage2";
    StageOverride o;
    o.ego = ego_from(field(*it, "ego", p), p + ".ego");
    o.agents = agents_from(field(*it, "agents", p), p + ".agents");
    o.map = map_from(field(*it, "map", p), p + ".map");
    if (it->contains("ego_history")) o.ego_history = trajectory_from((*it)["ego_history"], p + ".ego_history");
    s.stage2 = std::move(o);
  }
  return s;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" in the message.
    throw Error(ErrorCode::MalformedFile, e.what());
  }
}

}  // namespace codec

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MalformedFile, "cannot write " + path.string());
  out << text;
}

std::vector<Scenario> parse_scenarios(const std::string& text) {
  const codec::json doc = codec::parse_document(text);
  const codec::json& list = codec::array(doc, "$");
  std::vector<Scenario> out;
  out.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    Scenario s = codec::scenario_from(list[i], "$[" + std::to_string(i) + "]");
    validate_scenario(s);
    for (const auto& prev : out) {
      if (prev.id == s.id) throw Error(ErrorCode::InvariantViolation, "scenario '" + s.id + "': id is not unique");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  return parse_scenarios(read_text_file(path));
}

std::string serialize_scenarios(const std::vector<Scenario>& scenarios) {
  codec::json arr = codec::json::array();
  for (const auto& s : scenarios) arr.push_back(codec::to_json(s));
  return arr.dump(1) + "\n";
}

void save_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios) {
  write_text_file(path, serialize_scenarios(scenarios));
}

std::vector<ScenarioLoadResult> load_scenarios_lenient(const std::filesystem::path& path) {
  const codec::json doc = codec::parse_document(read_text_file(path));
  const codec::json& list = codec::array(doc, "$");
  std::vector<ScenarioLoadResult> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    ScenarioLoadResult r;
    const auto& rec = list[i];
    if (rec.is_object() && rec.contains("id") && rec["id"].is_string()) {
      r.id = rec["id"].get<std::string>();
    } else {
      r.id = "#" + std::to_string(i);
    }
    try {
      Scenario s = codec::scenario_from(rec, "$[" + std::to_string(i) + "]");
      validate_scenario(s);
      r.scenario = std::move(s);
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

TrajectoryFile load_trajectory_file(const std::filesystem::path& path) {
  const codec::json doc = codec::parse_document(read_text_file(path));
  TrajectoryFile f;
  if (doc.contains("params")) f.params_json = doc["params"].dump();
  const codec::json& list = codec::array(codec::field(doc, "trajectories", "$"), "$.trajectories");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string p = "$.trajectories[" + std::to_string(i) + "]";
    Trajectory t = codec::trajectory_from(list[i], p);
    validate_trajectory(t, p);
    f.trajectories.push_back(std::move(t));
  }
  return f;
}

void save_trajectory_file(const std::filesystem::path& path, const TrajectoryFile& file) {
  codec::json doc;
  doc["params"] = codec::parse_document(file.params_json);
  codec::json arr = codec::json::array();
  for (const auto& t : file.trajectories) arr.push_back(codec::to_json(t));
  doc["trajectories"] = std::move(arr);
  write_text_file(path, doc.dump(1) + "\n");
}

}  // namespace vsf
