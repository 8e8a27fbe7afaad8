// vsf: command line front end for scenario generation, scoring, fusion and ablations.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vsf/error.hpp"
#include "vsf/harness.hpp"
#include "vsf/mock_vlm.hpp"
#include "vsf/scenario_io.hpp"
#include "vsf/vlm_fusion.hpp"

namespace {

using nlohmann::json;
using namespace vsf;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTransport = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

std::string config_text(const Globals& g) { return g.config_path.empty() ? "{}" : read_text_file(g.config_path); }

const Scenario& find_scenario(const std::vector<Scenario>& all, const std::string& id) {
  if (all.empty()) throw Error(ErrorCode::MalformedFile, "scenario file is empty");
  if (id.empty()) return all.front();
  for (const auto& s : all) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::MalformedFile, "no scenario with id '" + id + "'");
}

StageIndex stage_index(int stage) {
  if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidParams, "--stage must be 1 or 2");
  return stage == 1 ? StageIndex::First : StageIndex::Second;
}

json scores_to_json(const ScorerOutput& out) {
  json rows = json::array();
  for (const auto& s : out.scores) {
    json r = json::object();
    for (Metric m : kAllMetrics) r[std::string(metric_name(m))] = s[m];
    r["epdms"] = compose_epdms(s, MetricWeights::defaults());
    rows.push_back(std::move(r));
  }
  return {{"scorer", out.scorer_id}, {"scores", std::move(rows)}};
}

ScorerOutput scores_from_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path + ": not JSON");
  try {
    ScorerOutput out{j.at("scorer").get<std::string>(), {}};
    for (const auto& r : j.at("scores")) {
      SubScores s;
      for (Metric m : kAllMetrics) s[m] = r.at(std::string(metric_name(m))).get<double>();
      out.scores.push_back(s);
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path + ": " + e.what());
  }
}

json params_echo(const CandidateConfig& c, const std::string& scenario_id, int stage, bool anchors) {
  json v = {{"curvature_grid", c.vocabulary.curvature_grid},
            {"accel_grid", c.vocabulary.accel_grid},
            {"v_max", c.vocabulary.v_max},
            {"horizon", c.vocabulary.horizon},
            {"dt", c.vocabulary.dt},
            {"kappa_max", c.vocabulary.kappa_max}};
  if (c.vocabulary.second_phase) {
    v["second_phase"] = {{"switch_time", c.vocabulary.second_phase->switch_time},
                         {"curvature_grid", c.vocabulary.second_phase->curvature_grid}};
  }
  json p = {{"scenario", scenario_id}, {"stage", stage}, {"vocabulary", v}};
  if (anchors) {
    p["anchors"] = {{"seed_count", c.anchors.seed_count},
                    {"noise_scale_lon", c.anchors.noise_scale_lon},
                    {"noise_scale_lat", c.anchors.noise_scale_lat},
                    {"seed", c.anchors.rng_seed},
                    {"kappa_max", c.anchors.kappa_max}};
    p["seed_stride"] = c.seed_stride;
  }
  return p;
}

int run(int argc, char** argv) {
  CLI::App app{"Trajectory scoring, fusion and evaluation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config with candidates and vlm blocks")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  // gen-scenarios
  auto* gen = app.add_subcommand("gen-scenarios", "Generate a synthetic scenario file");
  std::string gen_kind = "fleet";
  std::size_t gen_count = 10;
  std::string gen_out;
  gen->add_option("--kind", gen_kind, "fleet or one of StraightClear, LeadBrake, RedLight, CurveLaneKeep, CrossTraffic");
  gen->add_option("--count", gen_count)->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out)->required();

  // gen-vocab
  auto* vocab = app.add_subcommand("gen-vocab", "Write the candidate set for one scenario stage");
  std::string v_scen, v_id, v_out;
  int v_stage = 1;
  bool v_no_anchors = false;
  vocab->add_option("--scenarios", v_scen)->required();
  vocab->add_option("--scenario-id", v_id);
  vocab->add_option("--stage", v_stage);
  vocab->add_option("--out", v_out)->required();
  vocab->add_flag("--no-anchors", v_no_anchors);

  // fit-scorer
  auto* fit = app.add_subcommand("fit-scorer", "Fit the directive-conditioned linear scorer on oracle labels");
  std::string f_scen, f_out;
  double f_lambda = 1e-3;
  std::size_t f_per_stage = 64, f_dim = 16;
  fit->add_option("--scenarios", f_scen)->required();
  fit->add_option("--out", f_out)->required();
  fit->add_option("--lambda", f_lambda);
  fit->add_option("--per-stage", f_per_stage)->check(CLI::PositiveNumber);
  fit->add_option("--embedding-dim", f_dim)->check(CLI::PositiveNumber);

  // score
  auto* score = app.add_subcommand("score", "Score a trajectory file");
  std::string s_scen, s_id, s_traj, s_scorer = "oracle", s_name, s_out, s_directive = "rule";
  int s_stage = 1;
  score->add_option("--scenarios", s_scen)->required();
  score->add_option("--scenario-id", s_id);
  score->add_option("--stage", s_stage);
  score->add_option("--trajectories", s_traj)->required();
  score->add_option("--scorer", s_scorer, "oracle, noisy:<sd> or linear:<params path>");
  score->add_option("--name", s_name, "Scorer id written to the output");
  score->add_option("--directive", s_directive, "rule or vlm (linear scorer only)");
  score->add_option("--out", s_out)->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse scorer outputs and select a trajectory");
  std::vector<std::string> u_scores, u_weights;
  bool u_vlm = false;
  std::string u_scen, u_id, u_traj, u_base_url;
  int u_stage = 1;
  fuse->add_option("--scores", u_scores, "Score files, one per scorer")->required();
  fuse->add_option("--weight", u_weights, "Model weight as <scorer>=<w>");
  fuse->add_flag("--vlm", u_vlm, "Select with the VLM fusioner");
  fuse->add_option("--scenarios", u_scen);
  fuse->add_option("--scenario-id", u_id);
  fuse->add_option("--stage", u_stage);
  fuse->add_option("--trajectories", u_traj);
  fuse->add_option("--base-url", u_base_url);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation spec");
  std::string a_spec, a_out;
  ablate->add_option("--spec", a_spec)->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", a_out, "Output directory, overrides the spec");

  // report
  auto* rep = app.add_subcommand("report", "Summarise a records file");
  std::string r_records;
  rep->add_option("--records", r_records)->required();

  // serve-mock-vlm
  auto* serve = app.add_subcommand("serve-mock-vlm", "Run the deterministic mock VLM server");
  std::string m_policy = "first";
  int m_port = 8080;
  MockOptions m_opts;
  serve->add_option("--policy", m_policy, "first, rule or fixed:<letter>");
  serve->add_option("--port", m_port);
  serve->add_option("--fail-first", m_opts.fail_first_n);
  serve->add_option("--garble-first", m_opts.garble_first_n);
  serve->add_flag("--truncate", m_opts.truncate);

  // render
  auto* render = app.add_subcommand("render", "Render selected candidates onto the front view");
  std::string d_scen, d_id, d_traj, d_out;
  std::vector<std::size_t> d_indices;
  int d_stage = 1;
  render->add_option("--scenarios", d_scen)->required();
  render->add_option("--scenario-id", d_id);
  render->add_option("--stage", d_stage);
  render->add_option("--trajectories", d_traj)->required();
  render->add_option("--indices", d_indices)->required()->delimiter(',');
  render->add_option("--out", d_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  const std::uint64_t seed = g.seed.value_or(0);

  if (*gen) {
    const auto scenarios = gen_kind == "fleet" ? gen_fleet(gen_count, seed)
                                               : gen_scenarios(scenario_kind_from_name(gen_kind), gen_count, seed);
    save_scenarios(gen_out, scenarios);
    std::cout << "wrote " << scenarios.size() << " scenarios to " << gen_out << "\n";
  } else if (*vocab) {
    CandidateConfig cc = candidate_config_from_json(config_text(g));
    if (g.seed) cc.anchors.rng_seed = seed;
    const auto all = load_scenarios(v_scen);
    const Scenario& sc = find_scenario(all, v_id);
    const StageIndex idx = stage_index(v_stage);
    const Stage stage = make_stage(sc, idx);
    TrajectoryFile file;
    file.trajectories = v_no_anchors ? generate_vocabulary(stage.ego, cc.vocabulary) : stage_candidates(sc, idx, stage, cc);
    file.params_json = params_echo(cc, sc.id, v_stage, !v_no_anchors).dump();
    save_trajectory_file(v_out, file);
    std::cout << "wrote " << file.trajectories.size() << " trajectories to " << v_out << "\n";
  } else if (*fit) {
    TrainingSetConfig tc;
    tc.candidates = candidate_config_from_json(config_text(g));
    tc.per_stage = f_per_stage;
    tc.seed = seed;
    const auto rows = build_training_rows(load_scenarios(f_scen), tc);
    const auto params = fit_linear_scorer(rows, f_lambda, DirectiveEmbedding::initialize(f_dim, seed ^ 0x5eed));
    save_linear_params(f_out, params);
    std::cout << "fitted on " << rows.size() << " rows, objective " << ridge_objective(params, rows) << "\n";
  } else if (*score) {
    const auto all = load_scenarios(s_scen);
    const Scenario& sc = find_scenario(all, s_id);
    const Stage stage = make_stage(sc, stage_index(s_stage));
    const auto trajs = load_trajectory_file(s_traj).trajectories;
    ScorerOutput out;
    if (s_scorer == "oracle") {
      out = oracle_scorer(trajs, stage);
    } else if (s_scorer.rfind("noisy:", 0) == 0) {
      out = noisy_scorer(trajs, stage, s_name.empty() ? "noisy" : s_name, std::stod(s_scorer.substr(6)), seed);
    } else if (s_scorer.rfind("linear:", 0) == 0) {
      const auto params = load_linear_params(s_scorer.substr(7));
      CognitiveDirective d;
      if (s_directive == "vlm") {
        HttpVlmBackend backend(endpoint_from_json(config_text(g)));
        d = VlmDirectiveProvider(backend).directive(stage);
      } else {
        d = rule_based_directive(stage.ego, stage);
      }
      out = linear_scorer(trajs, stage, stage.ego, d, params, s_name.empty() ? "linear" : s_name);
    } else {
      throw CLI::ValidationError("--scorer", "expected oracle, noisy:<sd> or linear:<path>");
    }
    if (!s_name.empty()) out.scorer_id = s_name;
    write_text_file(s_out, scores_to_json(out).dump(1) + "\n");
  } else if (*fuse) {
    std::vector<ScorerOutput> outputs;
    for (const auto& p : u_scores) outputs.push_back(scores_from_file(p));
    FusionConfig fc = FusionConfig::defaults();
    for (const auto& w : u_weights) {
      const auto eq = w.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--weight", "expected <scorer>=<weight>");
      fc.model_weights[w.substr(0, eq)] = std::stod(w.substr(eq + 1));
    }
    if (!u_vlm) {
      const auto fused = fuse_models(outputs, fc);
      const std::size_t best = select_best(fused, fc);
      json scores = json::array();
      for (const auto& f : fused) scores.push_back(f.score);
      std::cout << json{{"selected", best}, {"score", fused[best].score}, {"fused", scores}}.dump() << "\n";
    } else {
      if (u_scen.empty() || u_traj.empty()) throw CLI::ValidationError("--vlm", "needs --scenarios and --trajectories");
      const auto all = load_scenarios(u_scen);
      const Scenario& sc = find_scenario(all, u_id);
      const Stage stage = make_stage(sc, stage_index(u_stage));
      const auto trajs = load_trajectory_file(u_traj).trajectories;
      VlmEndpointConfig endpoint = endpoint_from_json(config_text(g));
      if (!u_base_url.empty()) endpoint.base_url = u_base_url;
      HttpVlmBackend backend(endpoint);
      VlmFusionConfig vc;
      vc.fusion = fc;
      const auto sel = vlm_select(stage, trajs, outputs, vc, backend);
      json presented = json::array();
      for (std::size_t i = 0; i < sel.diagnostics.presented.size(); ++i) {
        const auto& p = sel.diagnostics.presented[i];
        presented.push_back({{"label", p.label},
                             {"scorer", p.scorer_id},
                             {"index", p.index},
                             {"max_pos_err", sel.diagnostics.tracking[i].max_pos_err},
                             {"feasible", sel.diagnostics.tracking[i].feasible}});
      }
      json out = {{"selected", sel.index},
                  {"label", sel.label},
                  {"fallback", sel.diagnostics.fallback},
                  {"presented", presented},
                  {"replies", sel.diagnostics.raw_replies}};
      if (sel.diagnostics.fallback) out["fallback_reason"] = sel.diagnostics.fallback_reason;
      std::cout << out.dump() << "\n";
    }
  } else if (*ablate) {
    AblationSpec spec = load_ablation_spec(a_spec);
    if (!a_out.empty()) spec.output_dir = a_out;
    if (g.seed) spec.seed = seed;
    if (g.jobs) spec.jobs = *g.jobs;
    std::cout << run_ablation(spec).table;
  } else if (*rep) {
    std::cout << report(r_records);
  } else if (*serve) {
    MockVlmServer server(MockPolicy::parse(m_policy), m_opts);
    std::cerr << "mock VLM (" << m_policy << ") on http://" << m_opts.host << ":" << m_port << "\n";
    server.serve_forever(m_port);
  } else if (*render) {
    const auto all = load_scenarios(d_scen);
    const Scenario& sc = find_scenario(all, d_id);
    const Stage stage = make_stage(sc, stage_index(d_stage));
    const auto trajs = load_trajectory_file(d_traj).trajectories;
    std::vector<TopCandidate> presented;
    for (std::size_t i : d_indices) {
      if (i >= trajs.size()) throw Error(ErrorCode::InvalidParams, "index " + std::to_string(i) + " out of range");
      presented.push_back({"cli", i, std::string(1, static_cast<char>('A' + presented.size()))});
    }
    write_ppm(d_out, render_selection(stage, trajs, presented, VlmFusionConfig{}));
    std::cout << "wrote " << d_out << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const vsf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_transport() ? kTransport : kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
