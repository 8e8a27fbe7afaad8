#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsf/fusion.hpp"
#include "vsf/metrics.hpp"
#include "vsf/scorers.hpp"
#include "vsf/vlm_client.hpp"
#include "vsf/vlm_fusion.hpp"
#include "vsf/vocabulary.hpp"

namespace vsf {

enum class ScenarioKind { StraightClear, LeadBrake, RedLight, CurveLaneKeep, CrossTraffic };
inline constexpr std::array<ScenarioKind, 5> kAllScenarioKinds{ScenarioKind::StraightClear, ScenarioKind::LeadBrake,
                                                               ScenarioKind::RedLight, ScenarioKind::CurveLaneKeep,
                                                               ScenarioKind::CrossTraffic};

std::string_view to_string(ScenarioKind kind);
/// Accepts the enum spelling or snake_case. Throws InvalidConfig.
ScenarioKind scenario_kind_from_name(std::string_view name);

/// `count` scenarios of one kind, each with a stage-2 variant. Ids are "<kind>-<nnnn>".
std::vector<Scenario> gen_scenarios(ScenarioKind kind, std::size_t count, std::uint64_t rng_seed);

/// Kinds in rotation, `count` in total; ids are "s<nnnn>-<kind>".
std::vector<Scenario> gen_fleet(std::size_t count, std::uint64_t rng_seed);

struct CandidateConfig {
  VocabularyParams vocabulary{VocabularyParams::defaults()};
  AnchorParams anchors;
  std::size_t seed_stride{25};
};

/// Anchors use a seed derived from (anchors.rng_seed, scenario id, stage).
std::vector<Trajectory> stage_candidates(const Scenario& scenario, StageIndex index, const Stage& stage,
                                         const CandidateConfig& cfg);

enum class ScorerKind { Oracle, Noisy, Linear };
enum class DirectiveSource { Rule, Vlm };

struct ScorerSpec {
  std::string name;
  ScorerKind kind{ScorerKind::Oracle};
  double noise_sd{0.0};
  std::uint64_t seed{0};
  std::filesystem::path params_path;
  DirectiveSource directive{DirectiveSource::Rule};
};

enum class FusionMode { Weight, Vlm };

struct FusionRun {
  std::string name;
  FusionMode mode{FusionMode::Weight};
  std::vector<std::string> scorers;
  std::map<std::string, double> model_weights;  // empty means uniform
};

struct AblationSpec {
  std::filesystem::path scenario_file;
  std::filesystem::path output_dir;
  std::uint64_t seed{0};
  std::vector<ScorerSpec> scorers;
  std::vector<FusionRun> configs;
  CandidateConfig candidates;
  FusionConfig fusion{FusionConfig::defaults()};
  MetricWeights weights{MetricWeights::defaults()};
  VlmEndpointConfig endpoint;
  /// "first", "rule" or "fixed:<X>" starts an in-process mock server instead of using `endpoint`.
  std::optional<std::string> mock_policy;
  std::size_t jobs{1};
};

/// Throws InvalidConfig when names are missing, duplicated or undeclared.
void validate(const AblationSpec& spec);

/// JSON spec; relative paths resolve against `base_dir`.
AblationSpec parse_ablation_spec(const std::string& text, const std::filesystem::path& base_dir);
AblationSpec load_ablation_spec(const std::filesystem::path& path);

/// The "candidates" block of a spec or tool config; absent keys keep their defaults.
CandidateConfig candidate_config_from_json(const std::string& text);
/// The "vlm" block layered over VlmEndpointConfig::from_env().
VlmEndpointConfig endpoint_from_json(const std::string& text);

struct StageSelection {
  std::size_t index{0};
  SubScores scores;
  std::optional<VlmDiagnostics> vlm;
};

struct RunRecord {
  std::string scenario_id;
  std::string config;
  std::optional<StageSelection> stage1;
  std::optional<StageSelection> stage2;
  double epdms{0.0};
  std::string error;  // non-empty marks an error record

  [[nodiscard]] bool is_error() const { return !error.empty(); }
};

/// One line of JSON, no trailing newline. Wall time is kept out so records are reproducible.
std::string record_to_json_line(const RunRecord& rec);
RunRecord record_from_json_line(const std::string& line);

struct AblationResult {
  std::vector<RunRecord> records;
  std::string table;
};

/// Evaluates every scenario under every fusion config. Writes records.jsonl and timings.jsonl
/// and summary.txt into the output directory when it is non-empty.
AblationResult run_ablation(const AblationSpec& spec);

/// Same on already-loaded scenarios, no files written.
std::vector<RunRecord> evaluate_fleet(const std::vector<Scenario>& scenarios, const AblationSpec& spec,
                                      VlmBackend* backend = nullptr);

struct SummaryRow {
  std::string config;
  double epdms_stage1{0.0};
  std::optional<double> epdms_stage2;
  double epdms{0.0};
  std::size_t count{0};
};

/// Fleet means per config, sorted by config name. Error records are skipped.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, const MetricWeights& weights);

/// Aligned table, x100 with 2 decimals, "—" for a missing stage-2 column.
std::string format_report(const std::vector<SummaryRow>& rows);

/// Reads a records file and formats it. Throws MalformedRecords.
std::string report(const std::filesystem::path& records_path, const MetricWeights& weights = MetricWeights::defaults());

struct TrainingSetConfig {
  CandidateConfig candidates;
  std::size_t per_stage{64};  // candidates sampled per stage
  std::uint64_t seed{0};
};

/// Oracle-labelled rows with rule-based directives.
std::vector<TrainingRow> build_training_rows(const std::vector<Scenario>& scenarios, const TrainingSetConfig& cfg);

/// Mean over stages of the Spearman correlation between a scorer's fused ranking and the oracle's.
double mean_ranking_agreement(const std::vector<Scenario>& scenarios, const LinearScorerParams& params,
                              const TrainingSetConfig& cfg, const FusionConfig& fusion = FusionConfig::defaults());

}  // namespace vsf
