#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "engage/classify.hpp"
#include "engage/contrastive.hpp"
#include "engage/hrv.hpp"
#include "engage/rng.hpp"
#include "engage/signal.hpp"
#include "engage/synth.hpp"

namespace {

using namespace engage;

signal::SampledSignal noisy_sine(std::size_t n, double fs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(2 * M_PI * 1.2 * static_cast<double>(i) / fs) + 0.3 * rng.normal();
  return {std::move(v), fs, 0.0};
}

void BM_Periodogram(benchmark::State& state) {
  const auto sig = noisy_sine(static_cast<std::size_t>(state.range(0)), 30.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(signal::periodogram_psd(sig, signal::kHeartRateBand, true));
}
BENCHMARK(BM_Periodogram)->Arg(300)->Arg(900)->Arg(3000);

void BM_LossAndGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<signal::SampledSignal> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.push_back(noisy_sine(300, 30.0, i));
    b.push_back(noisy_sine(300, 30.0, 100 + i));
  }
  for (auto _ : state) benchmark::DoNotOptimize(contrastive::total_loss_with_gradient(a, b));
}
BENCHMARK(BM_LossAndGradient)->Arg(4)->Arg(8);

void BM_DetectPeaks(benchmark::State& state) {
  synth::PulseSpec spec;
  spec.duration_s = static_cast<double>(state.range(0));
  spec.snr_db = 20.0;
  const auto ppg = synth::synth_ppg(spec).ppg;
  for (auto _ : state) benchmark::DoNotOptimize(hrv::detect_peaks(ppg));
}
BENCHMARK(BM_DetectPeaks)->Arg(60)->Arg(600);

void BM_HrvAll(benchmark::State& state) {
  synth::PulseSpec spec;
  spec.duration_s = 240.0;
  spec.hf_amp_ms = 30.0;
  spec.lf_amp_ms = 30.0;
  spec.jitter_std_ms = 10.0;
  const auto ibi = synth::synth_ppg(spec).ibis;
  for (auto _ : state) benchmark::DoNotOptimize(hrv::hrv_all(ibi));
}
BENCHMARK(BM_HrvAll);

struct Blobs {
  Matrix rows;
  std::vector<int> labels;
};

Blobs blobs(std::size_t n, std::size_t d) {
  Rng rng(3);
  Blobs b;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 3);
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c) row[c] = (c < 3 ? y : 0) + rng.normal();
    b.rows.append_row(row);
    b.labels.push_back(y);
  }
  return b;
}

void BM_ForestFit(benchmark::State& state) {
  const auto data = blobs(static_cast<std::size_t>(state.range(0)), 24);
  for (auto _ : state) benchmark::DoNotOptimize(classify::RandomForest::fit(data.rows, data.labels, {100, 1}));
}
BENCHMARK(BM_ForestFit)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_KnnPredict(benchmark::State& state) {
  const auto data = blobs(static_cast<std::size_t>(state.range(0)), 64);
  const auto model = classify::KnnModel::fit(data.rows, data.labels, 7);
  const auto queries = blobs(200, 64);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict_proba(queries.rows));
}
BENCHMARK(BM_KnnPredict)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
