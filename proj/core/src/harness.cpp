#include "vsf/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "vsf/error.hpp"
#include "vsf/mock_vlm.hpp"
#include "vsf/rng.hpp"
#include "vsf/scenario_io.hpp"

namespace vsf {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kHistory = 1.0;

// Platform-independent draws; std distributions differ between standard libraries.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool coin() { return (next() >> 63) != 0; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

Polygon rect(double x0, double x1, double y0, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

Lane straight_lane(double y, double x0, double x1) {
  Lane lane;
  for (double x = x0; x <= x1 + 1e-9; x += 5.0) lane.centerline.push_back({x, y});
  lane.direction.assign(lane.centerline.size() - 1, 0.0);
  lane.half_width = kLaneWidth / 2;
  return lane;
}

MapContext straight_road(double x0 = -40.0, double x1 = 160.0) {
  MapContext map;
  map.lanes.push_back(straight_lane(0.0, x0, x1));
  map.lanes.push_back(straight_lane(kLaneWidth, x0, x1));
  map.drivable.push_back(rect(x0, x1, -kLaneWidth / 2 - 0.5, kLaneWidth * 1.5 + 0.5));
  map.route = map.lanes.front().centerline;
  return map;
}

// Straight run-in, an arc of at most a quarter turn, then a straight exit.
MapContext curved_road(double kappa) {
  Lane lane;
  lane.half_width = kLaneWidth / 2;
  std::vector<double> headings;
  for (double x = -40.0; x < 0.0; x += 5.0) {
    lane.centerline.push_back({x, 0.0});
    headings.push_back(0.0);
  }
  const double arc_len = std::min(120.0, (std::numbers::pi / 2) / std::abs(kappa));
  const double step = 2.0;
  Vec2 p{0.0, 0.0};
  double heading = 0.0;
  for (double s = 0.0; s < arc_len; s += step) {
    lane.centerline.push_back(p);
    headings.push_back(heading);
    const double ds = std::min(step, arc_len - s);
    const double dth = kappa * ds;
    const double chord = std::abs(dth) < 1e-12 ? ds : 2.0 * std::sin(dth / 2) / kappa;
    p = p + chord * unit_from_heading(heading + dth / 2);
    heading += dth;
  }
  for (double s = 0.0; s <= 100.0; s += 5.0) {
    lane.centerline.push_back(p + s * unit_from_heading(heading));
    headings.push_back(heading);
  }
  for (std::size_t i = 0; i + 1 < lane.centerline.size(); ++i) {
    const Vec2 d = lane.centerline[i + 1] - lane.centerline[i];
    lane.direction.push_back(std::atan2(d.y, d.x));
  }
  const double half = kLaneWidth / 2 + 1.0;
  Polygon poly;
  for (std::size_t i = 0; i < lane.centerline.size(); ++i) {
    poly.push_back(lane.centerline[i] + half * unit_from_heading(headings[i] + std::numbers::pi / 2));
  }
  for (std::size_t i = lane.centerline.size(); i-- > 0;) {
    poly.push_back(lane.centerline[i] - half * unit_from_heading(headings[i] + std::numbers::pi / 2));
  }
  MapContext map;
  map.route = lane.centerline;
  map.lanes.push_back(std::move(lane));
  map.drivable.push_back(signed_area(poly) < 0 ? Polygon(poly.rbegin(), poly.rend()) : poly);
  return map;
}

// Straight-line agent track over the horizon; braking starts at t_brake and holds at a stop.
std::vector<TrajectorySample> agent_track(Vec2 start, double heading, double speed, double t_brake = 1e9,
                                          double decel = 0.0) {
  std::vector<TrajectorySample> track;
  const int n = static_cast<int>(std::lround(kDefaultHorizon / kDefaultDt));
  Vec2 p = start;
  double v = speed;
  for (int k = 0; k <= n; ++k) {
    const double t = k * kDefaultDt;
    track.push_back({t, {p.x, p.y, heading}, v});
    const double a = t + 1e-9 >= t_brake ? -decel : 0.0;
    const double v_next = std::max(0.0, v + a * kDefaultDt);
    p = p + 0.5 * (v + v_next) * kDefaultDt * unit_from_heading(heading);
    v = v_next;
  }
  return track;
}

Scenario make_scenario(ScenarioKind kind, std::string id, std::uint64_t seed) {
  Draw rng(seed);
  Scenario sc;
  sc.id = std::move(id);
  sc.ego.speed = rng.uniform(6.0, 12.0);
  sc.map = straight_road();

  switch (kind) {
    case ScenarioKind::StraightClear:
      break;
    case ScenarioKind::LeadBrake: {
      const double x0 = rng.uniform(14.0, 28.0);
      const double v = sc.ego.speed * rng.uniform(0.8, 1.1);
      const double t_brake = rng.uniform(0.3, 1.5);
      const double decel = rng.uniform(3.0, 5.0);
      sc.agents.push_back({"lead", 4.5, 1.9, agent_track({x0, 0.0}, 0.0, v, t_brake, decel)});
      break;
    }
    case ScenarioKind::RedLight: {
      const double x = rng.uniform(18.0, 40.0);
      TrafficLight light;
      light.stop_line = {{x, -kLaneWidth / 2 - 0.5}, {x, kLaneWidth * 1.5 + 0.5}};
      light.state_timeline = {{0.0, LightState::Red}};
      sc.map.traffic_lights.push_back(light);
      break;
    }
    case ScenarioKind::CurveLaneKeep: {
      const double kappa = rng.uniform(0.02, 0.05) * (rng.coin() ? 1.0 : -1.0);
      sc.map = curved_road(kappa);
      sc.ego.command = kappa > 0 ? DrivingCommand::Left : DrivingCommand::Right;
      break;
    }
    case ScenarioKind::CrossTraffic: {
      const double xc = rng.uniform(20.0, 35.0);
      const double v = rng.uniform(5.0, 9.0);
      const double side = rng.coin() ? 1.0 : -1.0;
      const double reach = v * (xc / sc.ego.speed) * rng.uniform(0.8, 1.2);
      const double y0 = -side * (reach + kLaneWidth / 2);
      sc.agents.push_back({"crossing", 4.5, 1.9, agent_track({xc, y0}, side * std::numbers::pi / 2, v)});
      sc.map.drivable.push_back(rect(xc - 4.0, xc + 4.0, -60.0, 60.0));
      break;
    }
  }
  sc.ego_history = backfill_history(sc.ego, kHistory, kDefaultDt);

  StageOverride s2;
  s2.ego = sc.ego;
  s2.ego.speed = sc.ego.speed * rng.uniform(0.8, 1.2);
  s2.map = sc.map;
  for (const auto& a : sc.agents) {
    Agent moved = a;
    const double dx = rng.uniform(-2.0, 2.0);
    const double dy = rng.uniform(-0.3, 0.3);
    for (auto& s : moved.track) {
      s.pose.x += dx;
      s.pose.y += dy;
    }
    s2.agents.push_back(std::move(moved));
  }
  sc.stage2 = std::move(s2);
  return sc;
}

std::string padded(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 4 ? std::string(4 - s.size(), '0') + s : s;
}

std::string snake(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::StraightClear: return "straight_clear";
    case ScenarioKind::LeadBrake: return "lead_brake";
    case ScenarioKind::RedLight: return "red_light";
    case ScenarioKind::CurveLaneKeep: return "curve_lane_keep";
    case ScenarioKind::CrossTraffic: return "cross_traffic";
  }
  return "unknown";
}

std::uint64_t stage_seed(std::uint64_t base, const std::string& id, StageIndex index) {
  return mix_seed(mix_seed(base, id), static_cast<std::uint64_t>(index));
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::StraightClear: return "StraightClear";
    case ScenarioKind::LeadBrake: return "LeadBrake";
    case ScenarioKind::RedLight: return "RedLight";
    case ScenarioKind::CurveLaneKeep: return "CurveLaneKeep";
    case ScenarioKind::CrossTraffic: return "CrossTraffic";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_name(std::string_view name) {
  for (ScenarioKind k : kAllScenarioKinds) {
    if (name == to_string(k) || name == snake(k)) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown scenario kind '" + std::string(name) + "'");
}

std::vector<Scenario> gen_scenarios(ScenarioKind kind, std::size_t count, std::uint64_t rng_seed) {
  if (count == 0) throw Error(ErrorCode::InvalidParams, "count must be >= 1");
  std::vector<Scenario> out;
  const std::uint64_t base = mix_seed(rng_seed, snake(kind));
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_scenario(kind, snake(kind) + "-" + padded(i), mix_seed(base, i)));
  }
  return out;
}

std::vector<Scenario> gen_fleet(std::size_t count, std::uint64_t rng_seed) {
  if (count == 0) throw Error(ErrorCode::InvalidParams, "count must be >= 1");
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < count; ++i) {
    const ScenarioKind kind = kAllScenarioKinds[i % kAllScenarioKinds.size()];
    out.push_back(make_scenario(kind, "s" + padded(i) + "-" + snake(kind), mix_seed(rng_seed, i)));
  }
  return out;
}

std::vector<Trajectory> stage_candidates(const Scenario& scenario, StageIndex index, const Stage& stage,
                                         const CandidateConfig& cfg) {
  AnchorParams anchors = cfg.anchors;
  anchors.rng_seed = stage_seed(cfg.anchors.rng_seed, scenario.id, index);
  return generate_candidates(stage.ego, cfg.vocabulary, anchors, cfg.seed_stride);
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

std::vector<double> doubles(const json& j, const char* key) {
  std::vector<double> out;
  for (const auto& v : j.at(key)) out.push_back(v.get<double>());
  return out;
}

VocabularyParams vocabulary_from(const json& j) {
  VocabularyParams p = VocabularyParams::defaults();
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw Error(ErrorCode::InvalidConfig, "unknown vocabulary preset");
    return p;
  }
  if (j.contains("curvature_grid")) p.curvature_grid = doubles(j, "curvature_grid");
  if (j.contains("accel_grid")) p.accel_grid = doubles(j, "accel_grid");
  if (j.contains("second_phase")) {
    const json& s = j.at("second_phase");
    if (s.is_null()) {
      p.second_phase.reset();
    } else {
      p.second_phase = SecondPhase{s.value("switch_time", 2.0), doubles(s, "curvature_grid")};
    }
  }
  p.v_max = j.value("v_max", p.v_max);
  p.horizon = j.value("horizon", p.horizon);
  p.dt = j.value("dt", p.dt);
  p.kappa_max = j.value("kappa_max", p.kappa_max);
  return p;
}

AnchorParams anchors_from(const json& j) {
  AnchorParams a;
  a.seed_count = j.value("seed_count", a.seed_count);
  a.noise_scale_lon = j.value("noise_scale_lon", a.noise_scale_lon);
  a.noise_scale_lat = j.value("noise_scale_lat", a.noise_scale_lat);
  a.rng_seed = j.value("seed", a.rng_seed);
  a.kappa_max = j.value("kappa_max", a.kappa_max);
  return a;
}

CandidateConfig candidates_from(const json& c) {
  CandidateConfig cfg;
  if (c.contains("vocabulary")) cfg.vocabulary = vocabulary_from(c.at("vocabulary"));
  if (c.contains("anchors")) cfg.anchors = anchors_from(c.at("anchors"));
  cfg.seed_stride = c.value("seed_stride", cfg.seed_stride);
  return cfg;
}

VlmEndpointConfig endpoint_from(const json& v) {
  VlmEndpointConfig e = VlmEndpointConfig::from_env();
  e.base_url = v.value("base_url", e.base_url);
  e.model_name = v.value("model", e.model_name);
  e.timeout_s = v.value("timeout_s", e.timeout_s);
  e.max_retries = v.value("max_retries", e.max_retries);
  e.max_in_flight = v.value("max_in_flight", e.max_in_flight);
  return e;
}

json parse_config_object(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidConfig, "config is not a JSON object");
  return j;
}

}  // namespace

CandidateConfig candidate_config_from_json(const std::string& text) {
  const json j = parse_config_object(text);
  try {
    CandidateConfig cfg = j.contains("candidates") ? candidates_from(j.at("candidates")) : CandidateConfig{};
    validate(cfg.vocabulary);
    validate(cfg.anchors);
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("candidates: ") + e.what());
  }
}

VlmEndpointConfig endpoint_from_json(const std::string& text) {
  const json j = parse_config_object(text);
  try {
    VlmEndpointConfig e = endpoint_from(j.contains("vlm") ? j.at("vlm") : json::object());
    validate(e);
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, std::string("vlm: ") + ex.what());
  }
}

void validate(const AblationSpec& spec) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (spec.scorers.empty()) bad("at least one scorer must be declared");
  std::set<std::string> names;
  for (const auto& s : spec.scorers) {
    if (s.name.empty()) bad("scorer name must not be empty");
    if (!names.insert(s.name).second) bad("duplicate scorer '" + s.name + "'");
    if (s.kind == ScorerKind::Noisy && !(s.noise_sd >= 0.0)) bad("scorer '" + s.name + "' needs sd >= 0");
    if (s.kind == ScorerKind::Linear && s.params_path.empty()) bad("scorer '" + s.name + "' needs a params path");
  }
  std::set<std::string> configs;
  for (const auto& c : spec.configs) {
    if (c.name.empty()) bad("config name must not be empty");
    if (!configs.insert(c.name).second) bad("duplicate config '" + c.name + "'");
    if (c.scorers.empty()) bad("config '" + c.name + "' lists no scorers");
    for (const auto& s : c.scorers) {
      if (!names.count(s)) bad("config '" + c.name + "' references undeclared scorer '" + s + "'");
    }
    for (const auto& [s, w] : c.model_weights) {
      if (std::find(c.scorers.begin(), c.scorers.end(), s) == c.scorers.end()) {
        bad("config '" + c.name + "' weights scorer '" + s + "' it does not use");
      }
    }
  }
  if (spec.jobs == 0) bad("jobs must be >= 1");
  validate(spec.fusion);
  validate(spec.weights);
  validate(spec.candidates.vocabulary);
  validate(spec.candidates.anchors);
  if (spec.candidates.seed_stride == 0) bad("seed_stride must be >= 1");
}

AblationSpec parse_ablation_spec(const std::string& text, const std::filesystem::path& base_dir) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidConfig, "ablation spec is not a JSON object");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  AblationSpec spec;
  try {
    if (j.contains("scenarios")) spec.scenario_file = resolve(j.at("scenarios").get<std::string>());
    if (j.contains("output_dir")) spec.output_dir = resolve(j.at("output_dir").get<std::string>());
    spec.seed = j.value("seed", spec.seed);
    spec.jobs = j.value("jobs", spec.jobs);
    if (j.contains("candidates")) spec.candidates = candidates_from(j.at("candidates"));
    for (const auto& s : j.at("scorers")) {
      ScorerSpec sc;
      sc.name = s.at("name").get<std::string>();
      const std::string type = s.at("type").get<std::string>();
      if (type == "oracle") {
        sc.kind = ScorerKind::Oracle;
      } else if (type == "noisy") {
        sc.kind = ScorerKind::Noisy;
        sc.noise_sd = s.at("sd").get<double>();
        sc.seed = s.value("seed", std::uint64_t{0});
      } else if (type == "linear") {
        sc.kind = ScorerKind::Linear;
        sc.params_path = resolve(s.at("params").get<std::string>());
        const std::string src = s.value("directive", std::string("rule"));
        if (src != "rule" && src != "vlm") throw Error(ErrorCode::InvalidConfig, "directive must be rule or vlm");
        sc.directive = src == "vlm" ? DirectiveSource::Vlm : DirectiveSource::Rule;
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown scorer type '" + type + "'");
      }
      spec.scorers.push_back(std::move(sc));
    }
    for (const auto& c : j.at("configs")) {
      FusionRun run;
      run.name = c.at("name").get<std::string>();
      const std::string mode = c.value("mode", std::string("weight"));
      if (mode != "weight" && mode != "vlm") throw Error(ErrorCode::InvalidConfig, "mode must be weight or vlm");
      run.mode = mode == "vlm" ? FusionMode::Vlm : FusionMode::Weight;
      run.scorers = c.at("scorers").get<std::vector<std::string>>();
      if (c.contains("model_weights")) run.model_weights = c.at("model_weights").get<std::map<std::string, double>>();
      spec.configs.push_back(std::move(run));
    }
    if (j.contains("fusion")) spec.fusion.epsilon = j.at("fusion").value("epsilon", spec.fusion.epsilon);
    spec.endpoint = endpoint_from(j.contains("vlm") ? j.at("vlm") : json::object());
    if (j.contains("vlm") && j.at("vlm").contains("mock_policy")) {
      spec.mock_policy = j.at("vlm").at("mock_policy").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("ablation spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

AblationSpec load_ablation_spec(const std::filesystem::path& path) {
  return parse_ablation_spec(read_text_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Records

namespace {

ojson scores_json(const SubScores& s) {
  ojson o = ojson::object();
  for (Metric m : kAllMetrics) o[std::string(metric_name(m))] = s[m];
  return o;
}

SubScores scores_from(const json& j) {
  SubScores s;
  for (Metric m : kAllMetrics) s[m] = j.at(std::string(metric_name(m))).get<double>();
  return s;
}

ojson vlm_json(const VlmDiagnostics& d) {
  ojson o = ojson::object();
  o["fallback"] = d.fallback;
  if (d.fallback) o["fallback_reason"] = d.fallback_reason;
  ojson presented = ojson::array();
  for (std::size_t i = 0; i < d.presented.size(); ++i) {
    const auto& p = d.presented[i];
    ojson entry = {{"label", p.label}, {"scorer", p.scorer_id}, {"index", p.index}};
    if (i < d.tracking.size()) {
      entry["max_pos_err"] = d.tracking[i].max_pos_err;
      entry["feasible"] = d.tracking[i].feasible;
    }
    presented.push_back(std::move(entry));
  }
  o["presented"] = std::move(presented);
  o["replies"] = d.raw_replies;
  return o;
}

ojson stage_json(const StageSelection& s) {
  ojson o = {{"index", s.index}, {"scores", scores_json(s.scores)}};
  if (s.vlm) o["vlm"] = vlm_json(*s.vlm);
  return o;
}

VlmDiagnostics vlm_from(const json& j) {
  VlmDiagnostics d;
  d.fallback = j.at("fallback").get<bool>();
  d.fallback_reason = j.value("fallback_reason", std::string());
  for (const auto& p : j.at("presented")) {
    d.presented.push_back({p.at("scorer").get<std::string>(), p.at("index").get<std::size_t>(),
                           p.at("label").get<std::string>()});
    if (p.contains("max_pos_err")) {
      d.tracking.push_back({p.at("max_pos_err").get<double>(), p.at("feasible").get<bool>(), 0.0});
    }
  }
  d.raw_replies = j.at("replies").get<std::vector<std::string>>();
  return d;
}

StageSelection stage_from(const json& j) {
  StageSelection s;
  s.index = j.at("index").get<std::size_t>();
  s.scores = scores_from(j.at("scores"));
  if (j.contains("vlm")) s.vlm = vlm_from(j.at("vlm"));
  return s;
}

}  // namespace

std::string record_to_json_line(const RunRecord& rec) {
  ojson o = ojson::object();
  o["scenario"] = rec.scenario_id;
  if (rec.is_error()) {
    o["error"] = rec.error;
    return o.dump();
  }
  o["config"] = rec.config;
  o["stage1"] = rec.stage1 ? stage_json(*rec.stage1) : ojson();
  o["stage2"] = rec.stage2 ? stage_json(*rec.stage2) : ojson();
  o["epdms"] = rec.epdms;
  return o.dump();
}

RunRecord record_from_json_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecords, "record is not a JSON object");
  try {
    RunRecord rec;
    rec.scenario_id = j.at("scenario").get<std::string>();
    if (j.contains("error")) {
      rec.error = j.at("error").get<std::string>();
      if (rec.error.empty()) rec.error = "unspecified error";
      return rec;
    }
    rec.config = j.at("config").get<std::string>();
    if (!j.at("stage1").is_null()) rec.stage1 = stage_from(j.at("stage1"));
    if (j.contains("stage2") && !j.at("stage2").is_null()) rec.stage2 = stage_from(j.at("stage2"));
    rec.epdms = j.at("epdms").get<double>();
    if (!rec.stage1) throw Error(ErrorCode::MalformedRecords, "record has no stage1");
    return rec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecords, e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct FleetContext {
  const AblationSpec& spec;
  std::map<std::string, LinearScorerParams> linear;
  VlmBackend* backend{nullptr};
};

std::vector<ScorerOutput> run_scorers(const Scenario& sc, StageIndex index, const Stage& stage,
                                      const std::vector<Trajectory>& cands, const ScorerOutput& oracle,
                                      const FleetContext& ctx) {
  std::vector<ScorerOutput> out;
  std::optional<CognitiveDirective> rule_directive;
  std::optional<CognitiveDirective> vlm_directive;
  for (const auto& s : ctx.spec.scorers) {
    switch (s.kind) {
      case ScorerKind::Oracle:
        out.push_back({s.name, oracle.scores});
        break;
      case ScorerKind::Noisy:
        out.push_back(add_score_noise(oracle, s.name, s.noise_sd, stage_seed(mix_seed(ctx.spec.seed, s.seed), sc.id, index)));
        break;
      case ScorerKind::Linear: {
        CognitiveDirective d;
        if (s.directive == DirectiveSource::Vlm) {
          if (!ctx.backend) throw Error(ErrorCode::InvalidConfig, "VLM directive source without an endpoint");
          if (!vlm_directive) vlm_directive = VlmDirectiveProvider(*ctx.backend).directive(stage);
          d = *vlm_directive;
        } else {
          if (!rule_directive) rule_directive = RuleBasedDirectiveProvider().directive(stage);
          d = *rule_directive;
        }
        out.push_back(linear_scorer(cands, stage, stage.ego, d, ctx.linear.at(s.name), s.name));
        break;
      }
    }
  }
  return out;
}

std::vector<RunRecord> evaluate_scenario(const Scenario& sc, const FleetContext& ctx) {
  const AblationSpec& spec = ctx.spec;
  std::vector<RunRecord> records(spec.configs.size());
  for (std::size_t c = 0; c < spec.configs.size(); ++c) {
    records[c].scenario_id = sc.id;
    records[c].config = spec.configs[c].name;
  }
  std::vector<StageIndex> stages{StageIndex::First};
  if (sc.stage2) stages.push_back(StageIndex::Second);
  for (StageIndex index : stages) {
    const Stage stage = make_stage(sc, index);
    const auto cands = stage_candidates(sc, index, stage, spec.candidates);
    const ScorerOutput oracle = oracle_scorer(cands, stage);
    const auto outputs = run_scorers(sc, index, stage, cands, oracle, ctx);
    for (std::size_t c = 0; c < spec.configs.size(); ++c) {
      const FusionRun& run = spec.configs[c];
      std::vector<ScorerOutput> subset;
      for (const auto& name : run.scorers) {
        const auto it = std::find_if(spec.scorers.begin(), spec.scorers.end(),
                                     [&](const ScorerSpec& s) { return s.name == name; });
        subset.push_back(outputs[static_cast<std::size_t>(it - spec.scorers.begin())]);
      }
      FusionConfig fusion = spec.fusion;
      fusion.model_weights = run.model_weights;
      StageSelection sel;
      if (run.mode == FusionMode::Weight) {
        sel.index = select_best(fuse_models(subset, fusion), fusion);
      } else {
        if (!ctx.backend) throw Error(ErrorCode::InvalidConfig, "VLM fusion without an endpoint");
        VlmFusionConfig vcfg;
        vcfg.fusion = fusion;
        auto v = vlm_select(stage, cands, subset, vcfg, *ctx.backend);
        sel.index = v.index;
        sel.vlm = std::move(v.diagnostics);
      }
      sel.scores = oracle.scores[sel.index];
      (index == StageIndex::First ? records[c].stage1 : records[c].stage2) = std::move(sel);
    }
  }
  for (auto& r : records) {
    r.epdms = combine_stages(r.stage1->scores,
                             r.stage2 ? std::optional<SubScores>(r.stage2->scores) : std::nullopt, spec.weights)
                  .epdms;
  }
  return records;
}

struct ScenarioOutcome {
  std::vector<RunRecord> records;
  double wall_ms{0.0};
};

ScenarioOutcome evaluate_item(const ScenarioLoadResult& item, const FleetContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioOutcome out;
  if (!item.scenario) {
    out.records.push_back({item.id, "", std::nullopt, std::nullopt, 0.0, item.error});
  } else {
    try {
      out.records = evaluate_scenario(*item.scenario, ctx);
    } catch (const std::exception& e) {
      out.records = {{item.id, "", std::nullopt, std::nullopt, 0.0, e.what()}};
    }
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Bounded worker pool; `sink` sees outcomes in input order on the calling thread.
void evaluate_ordered(const std::vector<ScenarioLoadResult>& items, const FleetContext& ctx, std::size_t jobs,
                      const std::function<void(const ScenarioLoadResult&, ScenarioOutcome&&)>& sink) {
  const std::size_t n = items.size();
  std::vector<std::optional<ScenarioOutcome>> slots(n);
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      auto outcome = evaluate_item(items[i], ctx);
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(outcome);
      }
      ready.notify_all();
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t j = 0; j < std::min(jobs, n); ++j) pool.emplace_back(worker);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<ScenarioOutcome> outcome;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return slots[i].has_value(); });
      outcome = std::move(slots[i]);
      slots[i].reset();
    }
    sink(items[i], std::move(*outcome));
  }
}

// Records come out ordered by scenario id whatever the file order.
void sort_by_id(std::vector<ScenarioLoadResult>& items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const ScenarioLoadResult& a, const ScenarioLoadResult& b) { return a.id < b.id; });
}

FleetContext make_context(const AblationSpec& spec, VlmBackend* backend) {
  FleetContext ctx{spec, {}, backend};
  for (const auto& s : spec.scorers) {
    if (s.kind == ScorerKind::Linear) ctx.linear.emplace(s.name, load_linear_params(s.params_path));
  }
  return ctx;
}

bool needs_backend(const AblationSpec& spec) {
  const bool vlm_fusion = std::any_of(spec.configs.begin(), spec.configs.end(),
                                      [](const FusionRun& r) { return r.mode == FusionMode::Vlm; });
  const bool vlm_directive = std::any_of(spec.scorers.begin(), spec.scorers.end(), [](const ScorerSpec& s) {
    return s.kind == ScorerKind::Linear && s.directive == DirectiveSource::Vlm;
  });
  return vlm_fusion || vlm_directive;
}

}  // namespace

std::vector<RunRecord> evaluate_fleet(const std::vector<Scenario>& scenarios, const AblationSpec& spec,
                                      VlmBackend* backend) {
  validate(spec);
  const FleetContext ctx = make_context(spec, backend);
  std::vector<ScenarioLoadResult> items;
  for (const auto& sc : scenarios) items.push_back({sc.id, sc, {}});
  sort_by_id(items);
  std::vector<RunRecord> records;
  evaluate_ordered(items, ctx, spec.jobs, [&](const ScenarioLoadResult&, ScenarioOutcome&& o) {
    for (auto& r : o.records) records.push_back(std::move(r));
  });
  return records;
}

AblationResult run_ablation(const AblationSpec& spec) {
  validate(spec);
  auto items = load_scenarios_lenient(spec.scenario_file);
  sort_by_id(items);

  std::unique_ptr<MockVlmServer> mock;
  std::unique_ptr<HttpVlmBackend> backend;
  if (needs_backend(spec)) {
    VlmEndpointConfig endpoint = spec.endpoint;
    if (spec.mock_policy) {
      mock = std::make_unique<MockVlmServer>(MockPolicy::parse(*spec.mock_policy));
      mock->start(0);
      endpoint.base_url = mock->base_url();
    }
    backend = std::make_unique<HttpVlmBackend>(endpoint);
  }
  const FleetContext ctx = make_context(spec, backend.get());

  std::ofstream records_out;
  std::ofstream timings_out;
  if (!spec.output_dir.empty()) {
    std::filesystem::create_directories(spec.output_dir);
    records_out.open(spec.output_dir / "records.jsonl", std::ios::binary | std::ios::trunc);
    timings_out.open(spec.output_dir / "timings.jsonl", std::ios::binary | std::ios::trunc);
    if (!records_out || !timings_out) {
      throw Error(ErrorCode::MalformedFile, "cannot write into " + spec.output_dir.string());
    }
  }

  AblationResult result;
  evaluate_ordered(items, ctx, spec.jobs, [&](const ScenarioLoadResult& item, ScenarioOutcome&& o) {
    if (records_out.is_open()) {
      for (const auto& r : o.records) records_out << record_to_json_line(r) << '\n';
      records_out.flush();
      timings_out << json{{"scenario", item.id}, {"wall_ms", o.wall_ms}}.dump() << '\n';
    }
    for (auto& r : o.records) result.records.push_back(std::move(r));
  });
  result.table = format_report(summarize(result.records, spec.weights));
  if (!spec.output_dir.empty()) write_text_file(spec.output_dir / "summary.txt", result.table);
  return result;
}

// ---------------------------------------------------------------------------
// Report

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, const MetricWeights& weights) {
  struct Acc {
    double s1{0.0}, s2{0.0}, total{0.0};
    std::size_t n{0}, n2{0};
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : records) {
    if (r.is_error() || !r.stage1) continue;
    Acc& a = acc[r.config];
    a.s1 += compose_epdms(r.stage1->scores, weights);
    if (r.stage2) {
      a.s2 += compose_epdms(r.stage2->scores, weights);
      ++a.n2;
    }
    a.total += r.epdms;
    ++a.n;
  }
  std::vector<SummaryRow> rows;
  for (const auto& [name, a] : acc) {
    SummaryRow row{name, a.s1 / a.n, std::nullopt, a.total / a.n, a.n};
    if (a.n2 > 0) row.epdms_stage2 = a.s2 / a.n2;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_report(const std::vector<SummaryRow>& rows) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  const std::string dash = "—";
  std::size_t name_w = 6;
  for (const auto& r : rows) name_w = std::max(name_w, r.config.size());
  const std::size_t col_w = 8;
  auto cell = [&](const std::string& s, std::size_t display) { return std::string(col_w - std::min(col_w, display), ' ') + s; };
  auto line = [&](const std::string& name, const std::string& a, std::size_t aw, const std::string& b, std::size_t bw,
                  const std::string& c, std::size_t cw) {
    return name + std::string(name_w - name.size(), ' ') + "  " + cell(a, aw) + "  " + cell(b, bw) + "  " + cell(c, cw) +
           "\n";
  };
  std::string out = line("config", "EPDMS I", 7, "EPDMS II", 8, "EPDMS", 5);
  for (const auto& r : rows) {
    const std::string s1 = pct(r.epdms_stage1);
    const std::string s2 = r.epdms_stage2 ? pct(*r.epdms_stage2) : dash;
    const std::string t = pct(r.epdms);
    out += line(r.config, s1, s1.size(), s2, r.epdms_stage2 ? s2.size() : 1, t, t.size());
  }
  return out;
}

std::string report(const std::filesystem::path& records_path, const MetricWeights& weights) {
  std::ifstream in(records_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedRecords, "cannot read " + records_path.string());
  std::vector<RunRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRecords, records_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return format_report(summarize(records, weights));
}

// ---------------------------------------------------------------------------
// Directive-conditioned scorer data

namespace {

// First `k` entries of a seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Draw rng(seed);
  const std::size_t take = std::min(k, n);
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(take);
  return idx;
}

}  // namespace

std::vector<TrainingRow> build_training_rows(const std::vector<Scenario>& scenarios, const TrainingSetConfig& cfg) {
  std::vector<TrainingRow> rows;
  for (const auto& sc : scenarios) {
    for (StageIndex index : {StageIndex::First, StageIndex::Second}) {
      if (index == StageIndex::Second && !sc.stage2) continue;
      const Stage stage = make_stage(sc, index);
      const auto cands = stage_candidates(sc, index, stage, cfg.candidates);
      const auto oracle = score_candidates(cands, stage);
      const CognitiveDirective d = rule_based_directive(stage.ego, stage);
      const EgoFeatures ego = ego_features(stage.ego);
      for (std::size_t i : sample_indices(cands.size(), cfg.per_stage, stage_seed(cfg.seed, sc.id, index))) {
        rows.push_back({trajectory_features(cands[i], stage), ego, d, oracle[i], 1.0});
      }
    }
  }
  return rows;
}

double mean_ranking_agreement(const std::vector<Scenario>& scenarios, const LinearScorerParams& params,
                              const TrainingSetConfig& cfg, const FusionConfig& fusion) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& sc : scenarios) {
    for (StageIndex index : {StageIndex::First, StageIndex::Second}) {
      if (index == StageIndex::Second && !sc.stage2) continue;
      const Stage stage = make_stage(sc, index);
      const auto all = stage_candidates(sc, index, stage, cfg.candidates);
      const auto oracle_all = score_candidates(all, stage);
      std::vector<Trajectory> cands;
      ScorerOutput oracle{"oracle", {}};
      for (std::size_t i : sample_indices(all.size(), cfg.per_stage, stage_seed(cfg.seed, sc.id, index))) {
        cands.push_back(all[i]);
        oracle.scores.push_back(oracle_all[i]);
      }
      const CognitiveDirective d = rule_based_directive(stage.ego, stage);
      const auto predicted = linear_scorer(cands, stage, stage.ego, d, params);
      std::vector<double> a, b;
      for (const auto& f : rank_single(predicted, fusion)) a.push_back(f.score);
      for (const auto& f : rank_single(oracle, fusion)) b.push_back(f.score);
      const double rho = spearman_correlation(a, b);
      if (std::isfinite(rho)) {
        total += rho;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(ErrorCode::InvalidParams, "no stage produced a defined rank correlation");
  return total / static_cast<double>(n);
}

}  // namespace vsf
