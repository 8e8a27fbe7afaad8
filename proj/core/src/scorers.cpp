#include "vsf/scorers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "vsf/error.hpp"
#include "vsf/kinematics.hpp"
#include "vsf/rng.hpp"
#include "vsf/scenario_io.hpp"

namespace vsf {

namespace {

constexpr double kClearanceCap = 50.0;

SubScores clip(SubScores s) {
  for (double& v : s.values) v = std::clamp(v, 0.0, 1.0);
  return s;
}

}  // namespace

const std::array<std::string_view, kTrajectoryFeatureCount>& trajectory_feature_names() {
  static const std::array<std::string_view, kTrajectoryFeatureCount> names{
      "end_x",         "end_y",          "end_heading",    "mean_abs_curvature", "max_abs_curvature",
      "mean_abs_accel", "max_abs_accel", "arc_length",     "min_clearance",      "drivable_fraction",
      "offset_mean",   "offset_min",     "offset_max",     "offset_final",       "offset_std",
      "offset_mean_abs"};
  return names;
}

const std::array<std::string_view, kEgoFeatureCount>& ego_feature_names() {
  static const std::array<std::string_view, kEgoFeatureCount> names{"ego_speed", "ego_accel", "cmd_left",
                                                                    "cmd_forward", "cmd_right"};
  return names;
}

TrajectoryFeatures trajectory_features(const Trajectory& traj, const Stage& stage, const MetricConfig& cfg) {
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "features of empty trajectory");
  TrajectoryFeatures f{};
  const auto& end = traj.samples.back().pose;
  f[0] = end.x;
  f[1] = end.y;
  f[2] = end.heading;

  const auto curv = step_curvatures(traj.samples);
  double sum_k = 0.0;
  double max_k = 0.0;
  for (double k : curv) {
    sum_k += std::abs(k);
    max_k = std::max(max_k, std::abs(k));
  }
  f[3] = curv.empty() ? 0.0 : sum_k / static_cast<double>(curv.size());
  f[4] = max_k;

  const auto profile = motion_profile(traj.samples, traj.dt);
  double sum_a = 0.0;
  double max_a = 0.0;
  for (double a : profile.lon_accel) {
    sum_a += std::abs(a);
    max_a = std::max(max_a, std::abs(a));
  }
  f[5] = profile.lon_accel.empty() ? 0.0 : sum_a / static_cast<double>(profile.lon_accel.size());
  f[6] = max_a;
  f[7] = arc_length(traj.samples);

  double clearance = kClearanceCap;
  for (const auto& s : traj.samples) {
    for (const auto& agent : stage.agents) {
      clearance = std::min(clearance, norm(agent.state_at(s.t).pose.position() - s.pose.position()));
    }
  }
  f[8] = clearance;

  std::size_t inside = 0;
  for (const auto& s : traj.samples) {
    bool all = !stage.map.drivable.empty();
    for (const Vec2 c : ego_footprint(s.pose, cfg).corners()) {
      all = all && std::any_of(stage.map.drivable.begin(), stage.map.drivable.end(),
                               [&](const Polygon& p) { return point_in_polygon(c, p); });
    }
    if (all) ++inside;
  }
  f[9] = static_cast<double>(inside) / static_cast<double>(traj.size());

  std::vector<double> offsets;
  if (stage.map.route.size() >= 2) {
    for (const auto& s : traj.samples) {
      offsets.push_back(project_onto_polyline(s.pose.position(), stage.map.route).signed_offset);
    }
  } else {
    offsets.assign(traj.size(), 0.0);
  }
  const double n = static_cast<double>(offsets.size());
  const double mean = std::accumulate(offsets.begin(), offsets.end(), 0.0) / n;
  double var = 0.0;
  double mean_abs = 0.0;
  for (double o : offsets) {
    var += (o - mean) * (o - mean);
    mean_abs += std::abs(o);
  }
  f[10] = mean;
  f[11] = *std::min_element(offsets.begin(), offsets.end());
  f[12] = *std::max_element(offsets.begin(), offsets.end());
  f[13] = offsets.back();
  f[14] = std::sqrt(var / n);
  f[15] = mean_abs / n;
  return f;
}

EgoFeatures ego_features(const EgoState& ego) {
  return {ego.speed, ego.accel, ego.command == DrivingCommand::Left ? 1.0 : 0.0,
          ego.command == DrivingCommand::Forward ? 1.0 : 0.0, ego.command == DrivingCommand::Right ? 1.0 : 0.0};
}

ScorerOutput oracle_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, const MetricConfig& cfg) {
  return {"oracle", score_candidates(trajs, stage, cfg)};
}

GaussianScoreNoise::GaussianScoreNoise(std::uint64_t seed, std::string_view scorer_id)
    : rng_(mix_seed(seed, scorer_id)) {}

ScorerOutput add_score_noise(const ScorerOutput& oracle, std::string scorer_id, double noise_sd, std::uint64_t seed) {
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::InvalidParams, "noise_sd must be >= 0");
  GaussianScoreNoise noise(seed, scorer_id);
  ScorerOutput out{std::move(scorer_id), {}};
  out.scores.reserve(oracle.scores.size());
  for (const auto& s : oracle.scores) {
    SubScores n = s;
    for (double& v : n.values) v += noise.draw(noise_sd);
    out.scores.push_back(clip(n));
  }
  return out;
}

ScorerOutput noisy_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, std::string scorer_id,
                          double noise_sd, std::uint64_t seed, const MetricConfig& cfg) {
  return add_score_noise(oracle_scorer(trajs, stage, cfg), std::move(scorer_id), noise_sd, seed);
}

std::vector<double> linear_input(const TrajectoryFeatures& f, const EgoFeatures& e, const CognitiveDirective& d,
                                 const DirectiveEmbedding& embedding) {
  std::vector<double> x(f.begin(), f.end());
  x.insert(x.end(), e.begin(), e.end());
  const auto row = embedding.row(d.index());
  x.insert(x.end(), row.begin(), row.end());
  return x;
}

LinearScorerParams fit_linear_scorer(const std::vector<TrainingRow>& rows, double lambda,
                                     const DirectiveEmbedding& embedding) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidParams, "lambda must be >= 0");
  const std::size_t dim = kTrajectoryFeatureCount + kEgoFeatureCount + embedding.dim();
  if (rows.size() < dim + 1) {
    throw Error(ErrorCode::InvalidParams, "need at least " + std::to_string(dim + 1) + " training rows");
  }
  const auto p = static_cast<Eigen::Index>(dim + 1);  // last column is the bias
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(kMetricCount));
  Eigen::VectorXd x(p);
  for (const auto& r : rows) {
    const auto in = linear_input(r.features, r.ego, r.directive, embedding);
    for (std::size_t i = 0; i < dim; ++i) x(static_cast<Eigen::Index>(i)) = in[i];
    x(p - 1) = 1.0;
    normal.selfadjointView<Eigen::Lower>().rankUpdate(x, r.weight);
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      rhs.col(static_cast<Eigen::Index>(m)) += r.weight * r.target.values[m] * x;
    }
  }
  normal = normal.selfadjointView<Eigen::Lower>();
  for (Eigen::Index i = 0; i + 1 < p; ++i) normal(i, i) += lambda;

  Eigen::MatrixXd solution;
  if (lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (lu.rank() < p) throw Error(ErrorCode::DegenerateDesign, "design matrix is rank deficient");
    solution = lu.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "normal equations solve failed");
    solution = ldlt.solve(rhs);
  }
  if (!solution.allFinite()) throw Error(ErrorCode::NumericalFailure, "non-finite ridge solution");

  LinearScorerParams params;
  params.lambda = lambda;
  params.embedding = embedding;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    const auto col = solution.col(static_cast<Eigen::Index>(m));
    params.weights[m].assign(col.data(), col.data() + dim);
    params.bias[m] = col(p - 1);
  }
  return params;
}

std::array<double, kMetricCount> linear_raw_predict(const LinearScorerParams& params, const std::vector<double>& x) {
  if (x.size() != params.input_dim()) throw Error(ErrorCode::DimensionMismatch, "input length differs from weights");
  std::array<double, kMetricCount> out{};
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    if (params.weights[m].size() != x.size()) throw Error(ErrorCode::DimensionMismatch, "weight row length mismatch");
    out[m] = std::inner_product(x.begin(), x.end(), params.weights[m].begin(), params.bias[m]);
  }
  return out;
}

double ridge_objective(const LinearScorerParams& params, const std::vector<TrainingRow>& rows) {
  double total = 0.0;
  for (const auto& r : rows) {
    const auto pred = linear_raw_predict(params, linear_input(r.features, r.ego, r.directive, params.embedding));
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const double e = pred[m] - r.target.values[m];
      total += r.weight * e * e;
    }
  }
  for (const auto& w : params.weights) {
    for (double v : w) total += params.lambda * v * v;
  }
  return total;
}

ScorerOutput linear_scorer(const std::vector<Trajectory>& trajs, const Stage& stage, const EgoState& ego,
                           const CognitiveDirective& directive, const LinearScorerParams& params,
                           std::string scorer_id, const MetricConfig& cfg) {
  ScorerOutput out{std::move(scorer_id), {}};
  out.scores.reserve(trajs.size());
  const EgoFeatures e = ego_features(ego);
  for (const auto& t : trajs) {
    const auto pred = linear_raw_predict(params, linear_input(trajectory_features(t, stage, cfg), e, directive,
                                                              params.embedding));
    SubScores s;
    for (std::size_t m = 0; m < kMetricCount; ++m) s.values[m] = std::clamp(pred[m], 0.0, 1.0);
    out.scores.push_back(s);
  }
  return out;
}

std::string serialize_linear_params(const LinearScorerParams& params) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# vsf linear scorer v1\n";
  out << "lambda " << params.lambda << "\n";
  out << "features";
  for (auto n : trajectory_feature_names()) out << ' ' << n;
  for (auto n : ego_feature_names()) out << ' ' << n;
  for (std::size_t i = 0; i < params.embedding.dim(); ++i) out << " directive_" << i;
  out << "\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out << "metric " << metric_name(kAllMetrics[m]) << ' ' << params.bias[m];
    for (double w : params.weights[m]) out << ' ' << w;
    out << "\n";
  }
  out << "embedding " << kDirectiveCount << ' ' << params.embedding.dim() << "\n";
  for (const auto& row : params.embedding.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << row[i];
    out << "\n";
  }
  return out.str();
}

void save_linear_params(const std::filesystem::path& path, const LinearScorerParams& params) {
  write_text_file(path, serialize_linear_params(params));
}

LinearScorerParams parse_linear_params(const std::string& text) {
  auto bad = [](const std::string& m) -> Error { return Error(ErrorCode::MalformedFile, "linear params: " + m); };
  std::istringstream in(text);
  std::string line;
  LinearScorerParams params;
  std::size_t feature_count = 0;
  std::array<bool, kMetricCount> seen{};
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "lambda") {
      if (!(ls >> params.lambda)) throw bad("line " + std::to_string(line_no) + ": bad lambda");
    } else if (key == "features") {
      std::string name;
      while (ls >> name) ++feature_count;
    } else if (key == "metric") {
      std::string name;
      ls >> name;
      const auto m = metric_from_name(name);
      if (!m) throw bad("line " + std::to_string(line_no) + ": unknown metric '" + name + "'");
      const auto mi = static_cast<std::size_t>(*m);
      if (!(ls >> params.bias[mi])) throw bad("line " + std::to_string(line_no) + ": missing bias");
      double w = 0.0;
      while (ls >> w) params.weights[mi].push_back(w);
      seen[mi] = true;
    } else if (key == "embedding") {
      std::size_t rows = 0;
      std::size_t dim = 0;
      if (!(ls >> rows >> dim) || rows != kDirectiveCount) throw bad("bad embedding header");
      std::vector<std::vector<double>> table(rows, std::vector<double>(dim));
      for (auto& row : table) {
        if (!std::getline(in, line)) throw bad("truncated embedding table");
        ++line_no;
        std::istringstream rs(line);
        for (double& v : row) {
          if (!(rs >> v)) throw bad("line " + std::to_string(line_no) + ": short embedding row");
        }
      }
      try {
        params.embedding = DirectiveEmbedding::from_rows(std::move(table));
      } catch (const Error& e) {
        throw bad(e.what());
      }
    } else {
      throw bad("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) throw bad("missing metric rows");
  if (params.embedding.dim() == 0) throw bad("missing embedding table");
  if (feature_count != params.input_dim()) throw Error(ErrorCode::DimensionMismatch, "feature header length mismatch");
  for (const auto& w : params.weights) {
    if (w.size() != params.input_dim()) throw Error(ErrorCode::DimensionMismatch, "weight row length mismatch");
  }
  if (!(params.lambda > 0.0)) throw bad("lambda must be > 0");
  return params;
}

LinearScorerParams load_linear_params(const std::filesystem::path& path) {
  return parse_linear_params(read_text_file(path));
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::LengthMismatch, "spearman needs equal lengths >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace vsf
