#include "srvfgan/alignment.hpp"
#include "srvfgan/dataset.hpp"
#include "srvfgan/evaluation.hpp"
#include "srvfgan/motiongan.hpp"
#include "srvfgan/synthesis.hpp"

#include <benchmark/benchmark.h>

using namespace srvfgan;

namespace {

std::vector<Srvf> corpus_srvfs(std::size_t per_class, std::size_t frames) {
  SynthSpec spec;
  spec.per_class = per_class;
  spec.frames = frames;
  std::vector<Srvf> out;
  for (const auto& s : synth_corpus(spec, 1)) out.push_back(srvf_encode(Curve::from_sequence(s)));
  return out;
}

const PreparedDataset& dataset() {
  static const PreparedDataset data = [] {
    SynthSpec spec;
    spec.per_class = 32;
    spec.frames = 16;
    PrepareConfig pc;
    pc.frames = 16;
    pc.class_karcher.max_iters = 30;
    return prepare(synth_corpus(spec, 7), pc);
  }();
  return data;
}

void BM_GeodesicDistance(benchmark::State& state) {
  const auto q = corpus_srvfs(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(geodesic_distance(q[0], q[1]));
}
BENCHMARK(BM_GeodesicDistance)->Arg(16)->Arg(64);

void BM_Align(benchmark::State& state) {
  const auto q = corpus_srvfs(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(align(q[0], q[1]).cost);
}
BENCHMARK(BM_Align)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_KarcherMean(benchmark::State& state) {
  const auto q = corpus_srvfs(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(karcher_mean(q).iterations);
}
BENCHMARK(BM_KarcherMean)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DistanceMatrix(benchmark::State& state) {
  const auto q = corpus_srvfs(static_cast<std::size_t>(state.range(0)) / 2, 16);
  std::vector<std::size_t> labels(q.size(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(distance_matrix(q, labels, false).values.sum());
}
BENCHMARK(BM_DistanceMatrix)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ClassicalMds(benchmark::State& state) {
  const auto q = corpus_srvfs(static_cast<std::size_t>(state.range(0)) / 2, 16);
  const auto d = distance_matrix(q, std::vector<std::size_t>(q.size(), 0), false);
  for (auto _ : state) benchmark::DoNotOptimize(classical_mds(d.values).stress);
}
BENCHMARK(BM_ClassicalMds)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TrainIteration(benchmark::State& state) {
  TrainConfig cfg;
  cfg.batch = 64;
  cfg.generator_widths = {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
  cfg.critic_widths = cfg.generator_widths;
  cfg.n_iteration = 1;
  cfg.seed = 1;
  dataset();
  for (auto _ : state) benchmark::DoNotOptimize(train(dataset(), cfg).first.iterations);
}
BENCHMARK(BM_TrainIteration)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_GenerateSequence(benchmark::State& state) {
  TrainConfig cfg;
  cfg.n_iteration = 0;
  const auto model = train(dataset(), cfg).first;
  const Frame neutral = synth_neutral_frame(model.landmarks);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_landmark_sequence(model, 0, neutral, IntensityOptions{}, seed++).frames.size());
  }
}
BENCHMARK(BM_GenerateSequence)->Unit(benchmark::kMicrosecond);

void BM_RenderHeatmaps(benchmark::State& state) {
  SynthSpec spec;
  spec.per_class = 1;
  spec.frames = 32;
  spec.landmarks = 16;
  const auto seq = synth_corpus(spec, 3).front();
  HeatmapOptions ho;
  ho.out_of_bounds = OutOfBoundsPolicy::Clamp;
  for (auto _ : state) benchmark::DoNotOptimize(render_heatmaps(seq, ho).values.data());
}
BENCHMARK(BM_RenderHeatmaps)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
