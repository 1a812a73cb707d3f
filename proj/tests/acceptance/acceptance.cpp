// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
//
//   engage_acceptance [--cli <path to engage>] [--only A3,A7]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "engage/annotation.hpp"
#include "engage/classify.hpp"
#include "engage/contrastive.hpp"
#include "engage/error.hpp"
#include "engage/eval.hpp"
#include "engage/hrv.hpp"
#include "engage/pipeline.hpp"
#include "engage/rng.hpp"
#include "engage/synth.hpp"
#include "hrv_oracle.hpp"
#include "support.hpp"

namespace {

using namespace engage;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "!") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double feature(const hrv::HrvFeatureVector& v, std::string_view name) {
  const auto& names = hrv::HrvFeatureVector::names();
  return v[static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin())];
}

signal::PsdVector psd_of(std::vector<double> power) {
  std::vector<double> freqs(power.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) freqs[i] = static_cast<double>(i + 1);
  return {std::move(power), std::move(freqs), signal::kHeartRateBand};
}

Outcome a1() {
  Outcome o;
  const auto t0 = Clock::now();
  using contrastive::negative_loss;
  using contrastive::positive_loss;
  const std::vector<signal::PsdVector> basis{psd_of({1, 0}), psd_of({0, 1})};
  const std::vector<signal::PsdVector> e1{psd_of({1, 0})};
  const std::vector<signal::PsdVector> e2{psd_of({0, 1})};
  const std::vector<signal::PsdVector> same{psd_of({0.3, 0.7}), psd_of({0.3, 0.7})};
  o.check(positive_loss(same, same) == 0.0, "L_p(identical) = 0");
  o.check(positive_loss(basis, basis) == 2.0, "L_p(basis) = 2");
  o.check(negative_loss(e1, e1) == 0.0, "L_n(identical) = 0");
  o.check(negative_loss(e1, e2) == -2.0, "L_n(e1, e2) = -2");
  o.check(negative_loss(basis, basis) == -1.0, "L_n(basis) = -1");

  Rng rng(2024);
  std::size_t bad_p = 0, bad_n = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(6);
    const std::size_t len = 1 + rng.uniform_index(40);
    std::vector<signal::PsdVector> f, g;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto* side : {&f, &g}) {
        std::vector<double> p(len);
        double s = 0.0;
        for (auto& v : p) s += (v = rng.uniform());
        for (auto& v : p) v /= s;
        side->push_back(psd_of(std::move(p)));
      }
    }
    bad_p += positive_loss(f, g) < 0.0;
    bad_n += negative_loss(f, g) > 0.0;
  }
  o.check(bad_p == 0, "L_p >= 0 on 1000 fuzzed inputs");
  o.check(bad_n == 0, "L_n <= 0 on 1000 fuzzed inputs");
  const double dt = seconds_since(t0);
  o.check(dt < 1.0, "runtime " + fmt("%.3f s", dt) + " < 1 s");
  return o;
}

Outcome a2() {
  Outcome o;
  const auto t0 = Clock::now();
  contrastive::GradCheckOptions opts;
  opts.trials = 20;
  opts.n_samples = 4;
  opts.window = 128;
  opts.seed = 7;
  const auto r = contrastive::gradient_check(opts);
  o.check(r.trials == 20 && r.entries == 20 * 2 * 4 * 128, std::to_string(r.entries) + " entries over 20 trials");
  o.check(r.max_rel_err < 1e-4, "max relative error " + fmt("%.3e", r.max_rel_err) + " < 1e-4");
  const double dt = seconds_since(t0);
  o.check(dt < 30.0, "runtime " + fmt("%.2f s", dt) + " < 30 s");
  return o;
}

Outcome a3() {
  Outcome o;
  const auto t0 = Clock::now();
  synth::VideoPairSpec spec;
  spec.freq_a = 1.0;
  spec.freq_b = 1.5;
  spec.noise_std = 0.5;
  spec.height = spec.width = 8;
  spec.fs = 30.0;
  spec.frames = 900;
  spec.seed = 11;
  const std::vector<contrastive::VideoPair> pairs{synth::synth_video_pair(spec)};

  contrastive::SamplingSpec sampling;
  sampling.seed = 5;
  contrastive::TrainOptions train;
  train.steps = 200;
  train.seed = 3;
  const auto result = contrastive::train_toy_extractor(pairs, sampling, train);
  const double initial = result.loss_history.front();
  const double final_loss = result.loss_history.back();
  o.check(final_loss <= 0.5 * initial,
          "loss " + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_loss) + " (<= 0.5 x initial)");

  // The loss is mostly negative, so the ratio above is weak on its own. A
  // start weighted on the noise channels must learn to isolate the pulse.
  auto poor = train;
  poor.initial_weights = std::vector<double>{1.0, 0.05, -1.0};
  const auto relearned = contrastive::train_toy_extractor(pairs, sampling, poor);
  const double before = contrastive::evaluate_loss({*poor.initial_weights}, pairs, sampling);
  const double after = contrastive::evaluate_loss(relearned.extractor, pairs, sampling);
  const auto& w = relearned.extractor.channel_weights;
  const double share = std::abs(w[1]) / (std::abs(w[0]) + std::abs(w[1]) + std::abs(w[2]));
  o.check(after <= before - 0.05 && share >= 0.9, "noise-channel start: loss " + fmt("%.4f", before) + " -> " +
                                                      fmt("%.4f", after) + ", pulse-channel share " +
                                                      fmt("%.3f", share));

  const auto held_out = synth::synth_video(1.2, spec, 999);
  const auto trace = result.extractor.apply(held_out).spatial_mean();
  const double f = signal::dominant_frequency(signal::periodogram_psd(trace, signal::kHeartRateBand, true));
  o.check(std::abs(f - 1.2) <= 0.1, "held-out dominant frequency " + fmt("%.3f Hz", f) + " within 1.2 +- 0.1");
  const double dt = seconds_since(t0);
  o.check(dt < 120.0, "runtime " + fmt("%.1f s", dt) + " < 120 s");
  return o;
}

Outcome a4() {
  Outcome o;
  const auto& names = hrv::HrvFeatureVector::names();
  double worst = 0.0;
  std::string worst_name;
  bool identity = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ibi = test_support::random_ibi_series(seed);
    const auto lib = hrv::hrv_all(ibi);
    const auto ref = oracle::hrv_features(ibi.intervals_ms, ibi.onset_s);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double e = test_support::rel_err(lib.values[i], ref[i]);
      if (e > worst || std::isnan(e)) {
        worst = e;
        worst_name = std::string(names[i]);
      }
    }
    identity = identity && feature(lib, "HRV_SD1") == feature(lib, "HRV_SDSD") / std::sqrt(2.0);
  }
  o.check(worst < 1e-9, "oracle max relative error " + fmt("%.2e", worst) + " (" + worst_name + ") < 1e-9");
  o.check(identity, "SD1 == SDSD / sqrt(2) on 100 series");

  const std::vector<std::string> doubled{"HRV_MeanNN", "HRV_SDNN",  "HRV_RMSSD", "HRV_SDSD", "HRV_MadNN",
                                         "HRV_IQRNN",  "HRV_MinNN", "HRV_MaxNN", "HRV_TINN"};
  const std::vector<std::string> unchanged{"HRV_CVNN", "HRV_CVSD", "HRV_MCVNN"};
  std::map<std::string, int> misses;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto ibi = test_support::random_ibi_series(500 + seed);
    const auto base = hrv::hrv_all(ibi);
    for (auto& v : ibi.intervals_ms) v *= 2.0;
    const auto scaled = hrv::hrv_all(ibi);
    for (const auto& n : doubled) misses[n] += feature(scaled, n) != 2.0 * feature(base, n);
    for (const auto& n : unchanged) misses[n] += feature(scaled, n) != feature(base, n);
  }
  std::string failed;
  for (const auto& [name, count] : misses) {
    if (count > 0) failed += " " + name + "(" + std::to_string(count) + "/100)";
  }
  o.check(failed.empty(), failed.empty() ? "time-scaling table exact on 100 series"
                                         : "time-scaling table violated:" + failed);
  return o;
}

Outcome a5() {
  Outcome o;
  synth::PulseSpec clean;
  clean.hr_mean = 72.0;
  const auto p = synth::synth_ppg(clean);
  const double hr = hrv::mean_hr(hrv::compute_ibis(hrv::detect_peaks(p.ppg)));
  o.check(std::abs(hr - 72.0) <= 1.0, "infinite SNR: " + fmt("%.3f bpm", hr) + " within 72 +- 1");

  std::vector<double> est, ref;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    synth::PulseSpec noisy;
    noisy.hr_mean = 72.0;
    noisy.snr_db = 10.0;
    noisy.seed = seed;
    const auto q = synth::synth_ppg(noisy);
    est.push_back(hrv::mean_hr(hrv::compute_ibis(hrv::detect_peaks(q.ppg))));
    ref.push_back(72.0);
  }
  const auto err = eval::hr_error(est, ref);
  o.check(err.mae < 3.0, "10 dB over 20 seeds: MAE " + fmt("%.3f bpm", err.mae) + " < 3");
  return o;
}

struct SharedData {
  test_support::TempDir easy_dir;
  test_support::TempDir fusion_dir;
  std::filesystem::path easy_manifest;
  std::filesystem::path fusion_manifest;
  std::optional<pipeline::Corpus> easy;
  std::optional<pipeline::Corpus> fusion;

  const pipeline::Corpus& easy_corpus() {
    if (!easy) {
      auto spec = synth::preset("easy");
      spec.seed = 1;
      easy_manifest = synth::synth_engagement_dataset(spec, easy_dir.path()).manifest;
      easy = pipeline::Corpus::load(pipeline::Manifest::load(easy_manifest));
    }
    return *easy;
  }
  const pipeline::Corpus& fusion_corpus() {
    if (!fusion) {
      auto spec = synth::preset("fusion");
      spec.seed = 2;
      fusion_manifest = synth::synth_engagement_dataset(spec, fusion_dir.path()).manifest;
      fusion = pipeline::Corpus::load(pipeline::Manifest::load(fusion_manifest));
    }
    return *fusion;
  }
};

SharedData& shared() {
  static SharedData data;
  return data;
}

Outcome a6() {
  Outcome o;
  const auto& corpus = shared().easy_corpus();
  std::size_t emitted = 0, bad_std = 0, bad_span = 0;
  for (const int w : annotation::kHrvWindows) {
    const auto result = corpus.windows(w);
    for (const auto& s : result.samples) {
      ++emitted;
      bad_std += s.interval_std > corpus.threshold();
      const auto& rec = *std::find_if(corpus.recordings().begin(), corpus.recordings().end(),
                                      [&](const auto& r) { return r.entry.id == s.recording_id; });
      const bool in = rec.recording_bounds.contains(s.hrv_span) && rec.signal_bounds.contains(s.hrv_span) &&
                      rec.recording_bounds.contains(s.bf_span) && s.hrv_span.width() == w &&
                      s.bf_span.width() == annotation::kBfWindowSeconds;
      bad_span += !in;
    }
  }
  o.check(emitted > 0 && bad_std == 0, std::to_string(emitted) + " samples over 7 windows, none above threshold");
  o.check(bad_span == 0, "all spans in bounds");

  annotation::EngagementTrack track;
  for (int i = 0; i < 600; ++i) {
    track.timestamps.push_back(i * 0.5);
    track.values.push_back(2.5);
  }
  const auto stats = annotation::interval_stats(track);
  std::vector<double> stds;
  for (const auto& s : stats) stds.push_back(s.stddev);
  const auto kept = annotation::filter_and_label(stats, annotation::compute_median_threshold(stds));
  o.check(kept.size() == stats.size(), "constant track: " + std::to_string(stats.size() - kept.size()) + " dropped");
  o.check(annotation::label_for_mean(0.0) == annotation::EngagementClass::kMedium &&
              annotation::label_for_mean(5.0) == annotation::EngagementClass::kHigh,
          "mean 0 -> Medium, mean 5 -> High");
  return o;
}

double accuracy_at(const pipeline::Corpus& corpus, int window, std::vector<behavior::FeatureSet> sets,
                   std::size_t* samples = nullptr) {
  pipeline::FeatureOptions features;
  features.hrv_window_s = window;
  features.bf_sets = std::move(sets);
  const auto built = corpus.build(features);
  if (samples) *samples = built.dataset.size();
  eval::ExperimentOptions opts;
  opts.kind = classify::ModelKind::kKnnRf;
  opts.seed = 4;
  return eval::run_experiment(built.dataset, opts).test.accuracy;
}

Outcome a7() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto& corpus = shared().easy_corpus();
  std::size_t n240 = 0;
  const double acc240 = accuracy_at(corpus, 240, {}, &n240);
  const double acc60 = accuracy_at(corpus, 60, {});
  o.check(corpus.recordings().size() == 75, "25 participants, 75 recordings");
  o.check(n240 >= 2000, std::to_string(n240) + " samples at 240 s (>= 2000)");
  o.check(acc240 >= 0.90, "knn+rf accuracy at 240 s " + fmt("%.4f", acc240) + " >= 0.90");
  o.check(acc240 >= acc60, "accuracy 240 s " + fmt("%.4f", acc240) + " >= 60 s " + fmt("%.4f", acc60));
  const double dt = seconds_since(t0);
  o.check(dt < 600.0, "runtime " + fmt("%.1f s", dt) + " < 600 s");
  return o;
}

Outcome a8() {
  Outcome o;
  const auto& corpus = shared().fusion_corpus();
  const std::vector<behavior::FeatureSet> pose_au{behavior::FeatureSet{4}, behavior::FeatureSet{5}};
  for (const int w : annotation::kHrvWindows) {
    const double hrv_only = accuracy_at(corpus, w, {});
    const double fused = accuracy_at(corpus, w, pose_au);
    o.check(fused >= hrv_only,
            std::to_string(w) + " s: HRV+BF " + fmt("%.3f", fused) + " vs HRV " + fmt("%.3f", hrv_only));
  }
  return o;
}

Outcome a9() {
  Outcome o;
  Rng rng(9);
  Matrix rows;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    rows.append_row(std::vector<double>{std::round(rng.uniform(0, 5)), std::round(rng.uniform(0, 5)), rng.normal()});
    labels.push_back(static_cast<int>(rng.uniform_index(3)));
  }
  std::size_t mismatches = 0;
  const auto knn = classify::KnnModel::fit(rows, labels, 5);
  for (std::size_t q = 0; q < rows.rows(); ++q) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 3; ++c) s += (rows(r, c) - rows(q, c)) * (rows(r, c) - rows(q, c));
      d.push_back({s, r});
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> expect;
    for (int i = 0; i < 5; ++i) expect.push_back(d[static_cast<std::size_t>(i)].second);
    mismatches += knn.neighbors(rows.row(q)) != expect;
  }
  o.check(mismatches == 0, "knn neighbours equal exhaustive search on 200 points");

  const auto f1 = classify::RandomForest::fit(rows, labels, {50, 13}).predict_proba(rows);
  const auto f2 = classify::RandomForest::fit(rows, labels, {50, 13}).predict_proba(rows);
  o.check(std::equal(f1.data().begin(), f1.data().end(), f2.data().begin()), "forest deterministic per seed");

  const auto ens = classify::ensemble_predict(knn.predict_proba(rows), f1);
  double worst = 0.0;
  for (std::size_t r = 0; r < ens.proba.rows(); ++r) {
    double s = 0;
    for (double v : ens.proba.row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  o.check(worst <= 1e-9, "ensemble rows sum to 1 (max deviation " + fmt("%.1e", worst) + ")");

  std::vector<int> truth(1000);
  Matrix random_p(1000, 3);
  for (std::size_t i = 0; i < 1000; ++i) {
    truth[i] = static_cast<int>(rng.uniform_index(3));
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += (random_p(i, c) = rng.uniform());
    for (std::size_t c = 0; c < 3; ++c) random_p(i, c) /= s;
  }
  const auto random_m = eval::compute_metrics(truth, classify::argmax_rows(random_p), random_p);
  o.check(random_m.macro_roc_auc && std::abs(*random_m.macro_roc_auc - 0.5) <= 0.05,
          "random scores: macro AUC " + fmt("%.4f", random_m.macro_roc_auc.value_or(NAN)));
  Matrix perfect(1000, 3);
  for (std::size_t i = 0; i < 1000; ++i) perfect(i, static_cast<std::size_t>(truth[i])) = 1.0;
  const auto perfect_m = eval::compute_metrics(truth, truth, perfect);
  o.check(perfect_m.macro_roc_auc == 1.0, "perfect separation: macro AUC 1");
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome a10(const std::string& cli) {
  Outcome o;
  test_support::TempDir dir;
  auto spec = synth::preset("fusion");
  spec.participants = 6;
  spec.intervals_per_recording = 40;
  spec.seed = 10;
  const auto manifest = synth::synth_engagement_dataset(spec, dir / "data").manifest;
  if (!cli.empty()) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const auto out = dir / ("run" + std::to_string(run));
      const std::string cmd = "\"" + cli + "\" evaluate --manifest \"" + manifest.string() +
                              "\" --hrv-window 120 --bf-sets 4,5 --model knn+rf --seed 21 --out \"" + out.string() +
                              "\" > /dev/null";
      const int rc = std::system(cmd.c_str());
      o.check(rc == 0, "evaluate run " + std::to_string(run + 1) + " exit " + std::to_string(rc));
      outputs[run] = slurp(out / "metrics.json");
    }
    o.check(!outputs[0].empty() && outputs[0] == outputs[1], "CLI metrics.json byte-identical across runs");
  } else {
    const auto corpus = pipeline::Corpus::load(pipeline::Manifest::load(manifest));
    const auto built = corpus.build({120, {behavior::FeatureSet{4}, behavior::FeatureSet{5}}});
    eval::ExperimentOptions opts;
    opts.seed = 21;
    const auto a = eval::metrics_json(eval::run_experiment(built.dataset, opts).test);
    const auto b = eval::metrics_json(eval::run_experiment(built.dataset, opts).test);
    o.check(a == b, "metrics JSON byte-identical across runs (library; no --cli given)");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::string only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") cli = argv[i + 1];
    if (key == "--only") only = argv[i + 1];
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", [&] { return a10(cli); }}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && ("," + only + ",").find("," + id + ",") == std::string::npos) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const Error& e) {
      o.check(false, std::string("error ") + std::string(error_code_name(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%-3s %s  (%.1f s)  %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", seconds_since(t0), detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
