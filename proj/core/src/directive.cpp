#include "vsf/directive.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <regex>

#include "vsf/error.hpp"

namespace vsf {

CognitiveDirective CognitiveDirective::from_index(std::size_t index) {
  if (index >= kDirectiveCount) throw Error(ErrorCode::InvalidParams, "directive index out of range");
  return {static_cast<Longitudinal>(index / 3), static_cast<Lateral>(index % 3)};
}

std::string_view to_string(Longitudinal l) {
  switch (l) {
    case Longitudinal::Keep: return "Keep";
    case Longitudinal::Accelerate: return "Accelerate";
    case Longitudinal::Decelerate: return "Decelerate";
    case Longitudinal::Stop: return "Stop";
  }
  return "Keep";
}

std::string_view to_string(Lateral l) {
  switch (l) {
    case Lateral::Forward: return "Forward";
    case Lateral::Left: return "Left";
    case Lateral::Right: return "Right";
  }
  return "Forward";
}

std::string format_directive(const CognitiveDirective& d) {
  return std::string(to_string(d.longitudinal)) + ", " + std::string(to_string(d.lateral));
}

std::string format_directive_reply(const CognitiveDirective& d) { return "DIRECTIVE: " + format_directive(d); }

CognitiveDirective parse_directive_reply(std::string_view text) {
  static const std::regex pattern(R"(\b(keep|accelerate|decelerate|stop)\s*,\s*(forward|left|right)\b)",
                                  std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, pattern)) {
    throw Error(ErrorCode::UnrecognizedDirective, "no directive in reply '" + std::string(text) + "'");
  }
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string lon = lower(m[1].str());
  const std::string lat = lower(m[2].str());
  CognitiveDirective d;
  if (lon == "keep") d.longitudinal = Longitudinal::Keep;
  else if (lon == "accelerate") d.longitudinal = Longitudinal::Accelerate;
  else if (lon == "decelerate") d.longitudinal = Longitudinal::Decelerate;
  else d.longitudinal = Longitudinal::Stop;
  if (lat == "forward") d.lateral = Lateral::Forward;
  else if (lat == "left") d.lateral = Lateral::Left;
  else d.lateral = Lateral::Right;
  return d;
}

DirectiveEmbedding DirectiveEmbedding::initialize(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorCode::InvalidParams, "embedding dimension must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto n = static_cast<Eigen::Index>(kDirectiveCount);
  Eigen::MatrixXd rows(n, d);
  if (dim >= kDirectiveCount) {
    Eigen::MatrixXd g(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, n);
    rows = q.transpose();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) rows(i, j) = normal(rng);
      rows.row(i).normalize();
    }
  }
  DirectiveEmbedding e;
  e.dim_ = dim;
  e.table_.resize(kDirectiveCount * dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) e.table_[static_cast<std::size_t>(i * d + j)] = rows(i, j);
  }
  return e;
}

DirectiveEmbedding DirectiveEmbedding::from_rows(std::vector<std::vector<double>> rows) {
  if (rows.size() != kDirectiveCount) throw Error(ErrorCode::InvalidParams, "embedding needs 12 rows");
  const std::size_t dim = rows.front().size();
  if (dim == 0) throw Error(ErrorCode::InvalidParams, "embedding rows are empty");
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorCode::InvalidParams, "embedding rows differ in length");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      if (rows[i] == rows[j]) throw Error(ErrorCode::InvalidParams, "embedding rows must be distinct");
    }
  }
  DirectiveEmbedding e;
  e.dim_ = dim;
  for (const auto& r : rows) e.table_.insert(e.table_.end(), r.begin(), r.end());
  return e;
}

std::span<const double> DirectiveEmbedding::row(std::size_t index) const {
  if (index >= kDirectiveCount) throw Error(ErrorCode::InvalidParams, "directive index out of range");
  return std::span<const double>(table_).subspan(index * dim_, dim_);
}

std::vector<std::vector<double>> DirectiveEmbedding::rows() const {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < kDirectiveCount; ++i) {
    const auto r = row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

std::vector<double> encode_directive(const CognitiveDirective& d, const DirectiveEmbedding& table) {
  const auto r = table.row(d.index());
  return {r.begin(), r.end()};
}

std::optional<double> nearest_hazard_distance(const EgoState& ego, const Stage& stage,
                                              const DirectiveRuleConfig& cfg) {
  std::optional<double> best;
  auto consider = [&](double d) {
    if (d >= 0.0 && (!best || d < *best)) best = d;
  };
  const Vec2 p = ego.pose.position();
  const Vec2 dir = unit_from_heading(ego.pose.heading);
  constexpr double kRayLength = 1000.0;
  for (const auto& light : stage.map.traffic_lights) {
    if (light.state_at(0.0) != LightState::Red) continue;
    if (auto s = segment_intersection(p, p + dir * kRayLength, light.stop_line.a, light.stop_line.b)) {
      consider(*s * kRayLength);
    }
  }
  const Vec2 left{-dir.y, dir.x};
  for (const auto& agent : stage.agents) {
    const Vec2 rel = agent.state_at(0.0).pose.position() - p;
    const double ahead = dot(rel, dir);
    const double lateral = dot(rel, left);
    if (ahead <= 0.0) continue;
    if (std::abs(lateral) >= 0.5 * (agent.width + cfg.ego_width) + cfg.lateral_margin) continue;
    consider(std::max(0.0, ahead - 0.5 * (agent.length + cfg.ego_length)));
  }
  return best;
}

CognitiveDirective rule_based_directive(const EgoState& ego, const Stage& stage, const DirectiveRuleConfig& cfg) {
  CognitiveDirective d;
  switch (ego.command) {
    case DrivingCommand::Left: d.lateral = Lateral::Left; break;
    case DrivingCommand::Forward: d.lateral = Lateral::Forward; break;
    case DrivingCommand::Right: d.lateral = Lateral::Right; break;
  }
  const double stopping = ego.speed * ego.speed / (2.0 * cfg.comfort_decel) + cfg.stop_margin;
  const auto hazard = nearest_hazard_distance(ego, stage, cfg);
  if (hazard && *hazard <= stopping) {
    d.longitudinal = Longitudinal::Stop;
  } else if (hazard && *hazard <= 2.0 * stopping) {
    d.longitudinal = Longitudinal::Decelerate;
  } else if (ego.speed < cfg.accelerate_fraction * cfg.speed_limit) {
    d.longitudinal = Longitudinal::Accelerate;
  } else {
    d.longitudinal = Longitudinal::Keep;
  }
  return d;
}

}  // namespace vsf
