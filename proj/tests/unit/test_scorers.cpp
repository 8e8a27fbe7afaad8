#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "vsf/error.hpp"
#include "vsf/fusion.hpp"
#include "vsf/scorers.hpp"
#include "vsf/vocabulary.hpp"

using namespace vsf;

namespace {

std::vector<TrainingRow> random_rows(std::size_t n, std::uint64_t seed, const std::function<SubScores(const std::vector<double>&)>& target,
                                     const DirectiveEmbedding& emb) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<std::size_t> dir(0, kDirectiveCount - 1), cmd(0, 2);
  std::vector<TrainingRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRow r;
    for (double& f : r.features) f = g(rng);
    r.ego = {0, 0, 0, 5 + g(rng), g(rng)};
    r.ego[cmd(rng)] = 1.0;
    r.directive = CognitiveDirective::from_index(dir(rng));
    r.target = target(linear_input(r.features, r.ego, r.directive, emb));
    rows.push_back(r);
  }
  return rows;
}

SubScores known_rule(const std::vector<double>& x) {
  SubScores s;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    double v = 0.1 * static_cast<double>(m);
    for (std::size_t i = 0; i < x.size(); ++i) v += std::sin(static_cast<double>(i * 7 + m)) * 0.05 * x[i];
    s.values[m] = v;
  }
  return s;
}

std::vector<Trajectory> sample_candidates(const Stage& st, std::size_t stride = 10) {
  const auto all = generate_vocabulary(st.ego, VocabularyParams::defaults());
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < all.size(); i += stride) out.push_back(all[i]);
  return out;
}

}  // namespace

TEST(Oracle, EqualsMetricsFieldForField) {
  auto st = fixture::open_road();
  st.agents.push_back(fixture::moving_agent("lead", 25, 0, 0, 3));
  const auto cands = sample_candidates(st);
  const auto out = oracle_scorer(cands, st);
  const auto direct = score_candidates(cands, st);
  ASSERT_EQ(out.scores.size(), cands.size());
  EXPECT_EQ(out.scores, direct);
  EXPECT_EQ(oracle_scorer(cands, st).scores, out.scores);
  EXPECT_TRUE(oracle_scorer({}, st).scores.empty());
}

TEST(Oracle, ComposedArgmaxEqualsDirectEpdmsArgmax) {
  auto st = fixture::open_road();
  st.agents.push_back(fixture::moving_agent("lead", 30, 0, 0, 4));
  const auto cands = sample_candidates(st, 10);
  const auto out = oracle_scorer(cands, st);
  std::size_t best = 0;
  double best_e = -1;
  const auto ref = ep_reference(cands, st);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double e = compose_epdms(score_all(cands[i], st, ref), MetricWeights::defaults());
    if (e > best_e) {
      best_e = e;
      best = i;
    }
  }
  std::size_t composed = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (compose_epdms(out.scores[i], MetricWeights::defaults()) >
        compose_epdms(out.scores[composed], MetricWeights::defaults())) {
      composed = i;
    }
  }
  EXPECT_EQ(composed, best);
}

TEST(Noisy, ZeroSdEqualsOracle) {
  const auto st = fixture::open_road();
  const auto cands = sample_candidates(st, 50);
  EXPECT_EQ(noisy_scorer(cands, st, "n", 0.0, 1).scores, oracle_scorer(cands, st).scores);
}

TEST(Noisy, SameSeedSameScores) {
  const auto st = fixture::open_road();
  const auto cands = sample_candidates(st, 50);
  EXPECT_EQ(noisy_scorer(cands, st, "n", 0.1, 9).scores, noisy_scorer(cands, st, "n", 0.1, 9).scores);
  EXPECT_NE(noisy_scorer(cands, st, "n", 0.1, 9).scores, noisy_scorer(cands, st, "m", 0.1, 9).scores);
}

TEST(Noisy, PerturbationSdIsAsConfigured) {
  GaussianScoreNoise noise(2024, "noisy-a");
  double sum = 0, sq = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double d = noise.draw(0.1);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, 0.1, 0.01);
}

TEST(Noisy, OutputsStayInBounds) {
  const auto st = fixture::open_road();
  const auto out = noisy_scorer(sample_candidates(st, 20), st, "wild", 0.8, 3);
  for (const auto& s : out.scores) {
    for (double v : s.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Linear, RecoversKnownLinearRule) {
  const auto emb = DirectiveEmbedding::initialize();
  const auto train = random_rows(400, 1, known_rule, emb);
  const auto test = random_rows(200, 2, known_rule, emb);
  const auto params = fit_linear_scorer(train, 1e-8, emb);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    double ss_res = 0, ss_tot = 0, mean = 0;
    for (const auto& r : test) mean += r.target.values[m];
    mean /= static_cast<double>(test.size());
    for (const auto& r : test) {
      const double p = linear_raw_predict(params, linear_input(r.features, r.ego, r.directive, emb))[m];
      ss_res += (p - r.target.values[m]) * (p - r.target.values[m]);
      ss_tot += (r.target.values[m] - mean) * (r.target.values[m] - mean);
    }
    EXPECT_GT(1.0 - ss_res / ss_tot, 0.999) << "head " << m;
  }
}

TEST(Linear, ConstantTargetsGiveBiasOnly) {
  const auto emb = DirectiveEmbedding::initialize();
  const auto rows = random_rows(200, 3, [](const std::vector<double>&) { return SubScores{{0.7, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7}}; }, emb);
  const auto params = fit_linear_scorer(rows, 1e-3, emb);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    EXPECT_NEAR(params.bias[m], 0.7, 1e-6);
    for (double w : params.weights[m]) EXPECT_NEAR(w, 0.0, 1e-6);
  }
}

TEST(Linear, DuplicateRowsEqualDoubledWeight) {
  const auto emb = DirectiveEmbedding::initialize();
  auto rows = random_rows(120, 4, known_rule, emb);
  for (auto& r : rows) r.target.values[0] += 0.01 * std::sin(r.features[0] * 13);  // break exact fit
  auto duplicated = rows;
  duplicated.insert(duplicated.end(), rows.begin(), rows.begin() + 30);
  auto weighted = rows;
  for (std::size_t i = 0; i < 30; ++i) weighted[i].weight = 2.0;
  const auto a = fit_linear_scorer(duplicated, 0.5, emb);
  const auto b = fit_linear_scorer(weighted, 0.5, emb);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    EXPECT_NEAR(a.bias[m], b.bias[m], 1e-9);
    for (std::size_t i = 0; i < a.weights[m].size(); ++i) EXPECT_NEAR(a.weights[m][i], b.weights[m][i], 1e-9);
  }
}

TEST(Linear, FitNeverWorseThanZeroVector) {
  const auto emb = DirectiveEmbedding::initialize();
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    auto rows = random_rows(100, seed, known_rule, emb);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& r : rows) {
      for (double& v : r.target.values) v = u(rng);
    }
    const auto fitted = fit_linear_scorer(rows, 0.1, emb);
    LinearScorerParams zero = fitted;
    for (auto& w : zero.weights) std::fill(w.begin(), w.end(), 0.0);
    zero.bias.fill(0.0);
    EXPECT_LE(ridge_objective(fitted, rows), ridge_objective(zero, rows));
  }
}

TEST(Linear, ZeroWeightsHalfBiasPredictsHalf) {
  LinearScorerParams p;
  p.embedding = DirectiveEmbedding::initialize();
  for (auto& w : p.weights) w.assign(p.input_dim(), 0.0);
  p.bias.fill(0.5);
  const auto st = fixture::open_road();
  const auto out = linear_scorer(sample_candidates(st, 100), st, st.ego, {}, p);
  for (const auto& s : out.scores) {
    for (double v : s.values) EXPECT_EQ(v, 0.5);
  }
}

TEST(Linear, DirectiveBlockChangesPredictions) {
  LinearScorerParams p;
  p.embedding = DirectiveEmbedding::initialize();
  for (auto& w : p.weights) w.assign(p.input_dim(), 0.0);
  p.bias.fill(0.5);
  for (std::size_t i = kTrajectoryFeatureCount + kEgoFeatureCount; i < p.input_dim(); ++i) p.weights[0][i] = 0.3;
  const auto st = fixture::open_road();
  const auto cands = sample_candidates(st, 100);
  const auto a = linear_scorer(cands, st, st.ego, {Longitudinal::Accelerate, Lateral::Right}, p);
  const auto b = linear_scorer(cands, st, st.ego, {Longitudinal::Keep, Lateral::Forward}, p);
  EXPECT_NE(a.scores[0][Metric::NC], b.scores[0][Metric::NC]);
}

TEST(Linear, RejectsBadInputs) {
  const auto emb = DirectiveEmbedding::initialize();
  const auto rows = random_rows(10, 5, known_rule, emb);
  EXPECT_THROW(fit_linear_scorer(rows, 1.0, emb), Error);
  EXPECT_THROW(fit_linear_scorer(random_rows(100, 5, known_rule, emb), -1.0, emb), Error);
  LinearScorerParams p;
  p.embedding = emb;
  for (auto& w : p.weights) w.assign(p.input_dim(), 0.0);
  try {
    linear_raw_predict(p, std::vector<double>(3, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Linear, ExactlyCollinearDesignWithoutRidgeIsDegenerate) {
  const auto emb = DirectiveEmbedding::initialize();
  // The command one-hot sums to one, duplicating the bias column.
  const auto rows = random_rows(200, 6, known_rule, emb);
  try {
    fit_linear_scorer(rows, 0.0, emb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDesign);
  }
}

TEST(Linear, ParameterFileRoundTrip) {
  const auto emb = DirectiveEmbedding::initialize(8, 3);
  const auto params = fit_linear_scorer(random_rows(100, 7, known_rule, emb), 0.01, emb);
  const auto text = serialize_linear_params(params);
  EXPECT_NE(text.find(trajectory_feature_names()[0]), std::string::npos);
  const auto back = parse_linear_params(text);
  EXPECT_EQ(back.lambda, params.lambda);
  EXPECT_EQ(back.embedding, params.embedding);
  EXPECT_EQ(back.weights, params.weights);
  EXPECT_EQ(back.bias, params.bias);
  EXPECT_THROW(parse_linear_params("garbage"), Error);
}

TEST(Spearman, KnownValues) {
  EXPECT_DOUBLE_EQ(spearman_correlation({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman_correlation({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  EXPECT_NEAR(spearman_correlation({1, 1, 2}, {1, 2, 3}), 0.8660254037844386, 1e-12);
}
