#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

struct SecondPhase {
  double switch_time{2.0};
  std::vector<double> curvature_grid;
};

struct VocabularyParams {
  std::vector<double> curvature_grid;  // 1/m
  std::vector<double> accel_grid;      // m/s^2
  std::optional<SecondPhase> second_phase;
  double v_max{20.0};
  double horizon{kDefaultHorizon};
  double dt{kDefaultDt};
  double kappa_max{0.2};

  /// 25 curvatures x 8 accelerations x 5 second-phase curvatures = 1000 trajectories.
  static VocabularyParams defaults();
};

struct AnchorParams {
  int seed_count{4};
  double noise_scale_lon{1.0};
  double noise_scale_lat{0.5};
  std::uint64_t rng_seed{0};
  double kappa_max{0.2};
};

void validate(const VocabularyParams& params);
void validate(const AnchorParams& params);

/// Unicycle rollouts, one per grid combination, ordered (kappa, accel, second-phase kappa)
/// with the last index varying fastest.
std::vector<Trajectory> generate_vocabulary(const EgoState& ego, const VocabularyParams& params);

/// `seed_count` smoothly perturbed copies of every seed, deterministic in `rng_seed`.
std::vector<Trajectory> generate_anchors(const EgoState& ego, const std::vector<Trajectory>& seeds,
                                         const AnchorParams& params);

/// Vocabulary followed by anchors seeded from every `seed_stride`-th vocabulary entry.
std::vector<Trajectory> generate_candidates(const EgoState& ego, const VocabularyParams& vocab,
                                            const AnchorParams& anchors, std::size_t seed_stride);

}  // namespace vsf
