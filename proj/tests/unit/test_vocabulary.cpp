#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vsf/error.hpp"
#include "vsf/kinematics.hpp"
#include "vsf/vocabulary.hpp"

using namespace vsf;

namespace {

VocabularyParams single(double kappa, double accel) {
  VocabularyParams p;
  p.curvature_grid = {kappa};
  p.accel_grid = {accel};
  return p;
}

EgoState ego_at(double speed) {
  EgoState e;
  e.speed = speed;
  return e;
}

}  // namespace

TEST(Vocabulary, StraightLineCoversTwentyMetres) {
  const auto v = generate_vocabulary(ego_at(5), single(0, 0));
  ASSERT_EQ(v.size(), 1u);
  const auto& t = v[0];
  EXPECT_EQ(t.size(), 41u);
  EXPECT_NEAR(t.samples.back().pose.x, 20.0, 1e-12);
  EXPECT_NEAR(t.samples.back().pose.y, 0.0, 1e-12);
  EXPECT_NEAR(arc_length(t.samples), 20.0, 1e-9);
}

TEST(Vocabulary, ArcMatchesClosedFormCircle) {
  const auto v = generate_vocabulary(ego_at(5), single(0.1, 0));
  const auto& t = v[0];
  for (const auto& s : t.samples) {
    const Vec2 want = oracle::arc_endpoint(5, 0.1, s.t);
    EXPECT_NEAR(s.pose.x, want.x, 1e-3);
    EXPECT_NEAR(s.pose.y, want.y, 1e-3);
  }
  // Every sample is 10 m from the circle centre.
  for (const auto& s : t.samples) EXPECT_NEAR(std::hypot(s.pose.x, s.pose.y - 10.0), 10.0, 1e-9);
}

TEST(Vocabulary, DefaultGridHasOneThousandEntries) {
  const auto p = VocabularyParams::defaults();
  EXPECT_EQ(p.curvature_grid.size(), 25u);
  EXPECT_EQ(p.accel_grid.size(), 8u);
  ASSERT_TRUE(p.second_phase.has_value());
  EXPECT_EQ(p.second_phase->curvature_grid.size(), 5u);
  EXPECT_EQ(generate_vocabulary(ego_at(8), p).size(), 1000u);
}

TEST(Vocabulary, EveryEntryIsValidAndWithinCurvatureLimit) {
  const auto p = VocabularyParams::defaults();
  for (double v0 : {0.0, 3.0, 12.0, 19.5}) {
    EgoState ego = ego_at(v0);
    ego.pose = {3, -1, 2.9};
    for (const auto& t : generate_vocabulary(ego, p)) {
      EXPECT_NO_THROW(validate_trajectory(t, "vocab"));
      EXPECT_LE(max_abs_curvature(t.samples), p.kappa_max + 1e-6);
      EXPECT_EQ(t.samples.front().pose, ego.pose);
    }
  }
}

TEST(Vocabulary, PureFunctionOfInputs) {
  const auto p = VocabularyParams::defaults();
  EXPECT_EQ(generate_vocabulary(ego_at(9), p), generate_vocabulary(ego_at(9), p));
}

TEST(Vocabulary, OrderingLastIndexFastest) {
  VocabularyParams p;
  p.curvature_grid = {-0.1, 0.1};
  p.accel_grid = {-1, 1};
  p.second_phase = SecondPhase{2.0, {-0.05, 0.05}};
  const auto v = generate_vocabulary(ego_at(6), p);
  ASSERT_EQ(v.size(), 8u);
  // Entries 0 and 1 differ only in second-phase curvature, so their first halves coincide.
  EXPECT_EQ(v[0].samples[10], v[1].samples[10]);
  EXPECT_NE(v[0].samples.back(), v[1].samples.back());
  EXPECT_LT(v[0].samples.back().speed, v[2].samples.back().speed);
  EXPECT_LT(v[0].samples[10].pose.y, v[4].samples[10].pose.y);
}

TEST(Vocabulary, InvalidParamsAreRejected) {
  auto p = single(0.3, 0);
  EXPECT_THROW(generate_vocabulary(ego_at(5), p), Error);
  auto q = single(0, 0);
  q.accel_grid.clear();
  EXPECT_THROW(generate_vocabulary(ego_at(5), q), Error);
  auto r = VocabularyParams::defaults();
  r.second_phase->switch_time = 5.0;
  EXPECT_THROW(generate_vocabulary(ego_at(5), r), Error);
}

TEST(Anchors, ZeroNoiseReproducesSeeds) {
  const auto seeds = generate_vocabulary(ego_at(7), single(0.05, 0.5));
  AnchorParams a;
  a.noise_scale_lon = 0;
  a.noise_scale_lat = 0;
  a.seed_count = 3;
  const auto out = generate_anchors(ego_at(7), seeds, a);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& t : out) EXPECT_EQ(t, seeds[0]);
}

TEST(Anchors, DeterministicInSeed) {
  const auto seeds = generate_vocabulary(ego_at(7), VocabularyParams::defaults());
  AnchorParams a;
  a.rng_seed = 42;
  EXPECT_EQ(generate_anchors(ego_at(7), seeds, a), generate_anchors(ego_at(7), seeds, a));
  AnchorParams b = a;
  b.rng_seed = 43;
  EXPECT_NE(generate_anchors(ego_at(7), seeds, a), generate_anchors(ego_at(7), seeds, b));
}

TEST(Anchors, StartAtSeedStartPoseAndRespectLimits) {
  const auto seeds = generate_vocabulary(ego_at(6), single(0, 0));
  AnchorParams a;
  a.noise_scale_lat = 1.0;
  a.seed_count = 50;
  const auto out = generate_anchors(ego_at(6), seeds, a);
  bool any_moved = false;
  for (const auto& t : out) {
    EXPECT_EQ(t.samples.front().pose, seeds[0].samples.front().pose);
    EXPECT_LE(max_abs_curvature(t.samples), a.kappa_max + 1e-6);
    EXPECT_NO_THROW(validate_trajectory(t, "anchor"));
    any_moved = any_moved || std::abs(t.samples.back().pose.y) > 1e-3;
  }
  EXPECT_TRUE(any_moved);
}

TEST(Candidates, DefaultCountIsVocabularyPlusAnchors) {
  const auto c = generate_candidates(ego_at(8), VocabularyParams::defaults(), AnchorParams{}, 25);
  EXPECT_EQ(c.size(), 1000u + 40u * 4u);
}
