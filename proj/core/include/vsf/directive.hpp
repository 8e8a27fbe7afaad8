#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

enum class Longitudinal { Keep, Accelerate, Decelerate, Stop };
enum class Lateral { Forward, Left, Right };

inline constexpr std::size_t kDirectiveCount = 12;

struct CognitiveDirective {
  Longitudinal longitudinal{Longitudinal::Keep};
  Lateral lateral{Lateral::Forward};

  /// Lexicographic (longitudinal, lateral) index in [0, 12).
  [[nodiscard]] std::size_t index() const {
    return static_cast<std::size_t>(longitudinal) * 3 + static_cast<std::size_t>(lateral);
  }
  static CognitiveDirective from_index(std::size_t index);

  friend bool operator==(const CognitiveDirective&, const CognitiveDirective&) = default;
};

std::string_view to_string(Longitudinal l);
std::string_view to_string(Lateral l);

/// "Accelerate, Right"
std::string format_directive(const CognitiveDirective& d);
/// "DIRECTIVE: Accelerate, Right"
std::string format_directive_reply(const CognitiveDirective& d);

/// First case-insensitive "<longitudinal>, <lateral>" in the text. Throws UnrecognizedDirective.
CognitiveDirective parse_directive_reply(std::string_view text);

/// 12 x d lookup table; one row per directive.
class DirectiveEmbedding {
 public:
  /// Rows from a seeded Gaussian QR: orthonormal when d >= 12, unit-norm otherwise.
  static DirectiveEmbedding initialize(std::size_t dim = 16, std::uint64_t seed = 0x5eed);

  /// Throws InvalidParams unless there are 12 equal-length, pairwise distinct rows.
  static DirectiveEmbedding from_rows(std::vector<std::vector<double>> rows);

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::span<const double> row(std::size_t index) const;
  [[nodiscard]] std::vector<std::vector<double>> rows() const;

  friend bool operator==(const DirectiveEmbedding&, const DirectiveEmbedding&) = default;

 private:
  std::size_t dim_{0};
  std::vector<double> table_;  // row-major
};

std::vector<double> encode_directive(const CognitiveDirective& d, const DirectiveEmbedding& table);

struct DirectiveRuleConfig {
  double comfort_decel{3.0};
  double stop_margin{2.0};
  double speed_limit{15.0};
  double accelerate_fraction{0.8};
  double ego_length{4.6};
  double ego_width{1.9};
  double lateral_margin{0.5};
};

/// Distance along the ego heading to the nearest red stop line or blocking agent at t = 0.
std::optional<double> nearest_hazard_distance(const EgoState& ego, const Stage& stage,
                                              const DirectiveRuleConfig& cfg = {});

CognitiveDirective rule_based_directive(const EgoState& ego, const Stage& stage,
                                        const DirectiveRuleConfig& cfg = {});

/// Source of directives for directive-conditioned scorers.
class DirectiveProvider {
 public:
  virtual ~DirectiveProvider() = default;
  virtual CognitiveDirective directive(const Stage& stage) = 0;
};

class RuleBasedDirectiveProvider final : public DirectiveProvider {
 public:
  explicit RuleBasedDirectiveProvider(DirectiveRuleConfig cfg = {}) : cfg_(cfg) {}
  CognitiveDirective directive(const Stage& stage) override { return rule_based_directive(stage.ego, stage, cfg_); }

 private:
  DirectiveRuleConfig cfg_;
};

}  // namespace vsf
