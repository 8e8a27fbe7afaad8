#include <benchmark/benchmark.h>

#include "vsf/fusion.hpp"
#include "vsf/harness.hpp"
#include "vsf/lqr.hpp"
#include "vsf/metrics.hpp"
#include "vsf/scorers.hpp"
#include "vsf/vocabulary.hpp"

using namespace vsf;

namespace {

const Stage& sample_stage() {
  static const Stage st = make_stage(gen_fleet(8, 2024)[6], StageIndex::First);
  return st;
}

const std::vector<Trajectory>& sample_vocabulary() {
  static const auto v = generate_vocabulary(sample_stage().ego, VocabularyParams::defaults());
  return v;
}

void BM_Vocabulary(benchmark::State& state) {
  const auto params = VocabularyParams::defaults();
  for (auto _ : state) benchmark::DoNotOptimize(generate_vocabulary(sample_stage().ego, params));
}
BENCHMARK(BM_Vocabulary)->Unit(benchmark::kMillisecond);

void BM_ScoreAll(benchmark::State& state) {
  const auto& v = sample_vocabulary();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(score_all(v[i++ % v.size()], sample_stage(), std::nullopt));
}
BENCHMARK(BM_ScoreAll)->Unit(benchmark::kMicrosecond);

void BM_ScoreCandidates(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(score_candidates(sample_vocabulary(), sample_stage()));
}
BENCHMARK(BM_ScoreCandidates)->Unit(benchmark::kMillisecond);

void BM_FuseModels(benchmark::State& state) {
  const auto oracle = oracle_scorer(sample_vocabulary(), sample_stage());
  std::vector<ScorerOutput> outs;
  for (int k = 0; k < state.range(0); ++k) outs.push_back(add_score_noise(oracle, "m" + std::to_string(k), 0.1, k + 1));
  const auto cfg = FusionConfig::defaults();
  for (auto _ : state) benchmark::DoNotOptimize(select_best(fuse_models(outs, cfg), cfg));
}
BENCHMARK(BM_FuseModels)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_TrackTrajectory(benchmark::State& state) {
  const auto& v = sample_vocabulary();
  const LqrConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& t = v[i++ % v.size()];
    benchmark::DoNotOptimize(track_trajectory(t, to_bicycle(t.samples.front()), cfg));
  }
}
BENCHMARK(BM_TrackTrajectory)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
