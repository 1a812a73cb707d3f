#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "engage/contrastive.hpp"
#include "engage/hrv.hpp"
#include "engage/signal.hpp"

namespace engage::synth {

struct PulseSpec {
  double hr_mean = 72.0;       // bpm, [40, 180]
  double lf_amp_ms = 0.0;      // 0.1 Hz interval modulation
  double hf_amp_ms = 0.0;      // 0.25 Hz interval modulation
  double jitter_std_ms = 0.0;  // per-beat Gaussian jitter
  double duration_s = 60.0;
  double fs = 100.0;  // >= 10
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

struct SynthPulse {
  signal::SampledSignal ppg;
  std::vector<double> beat_times;  // seconds
  hrv::IbiSeries ibis;             // between consecutive true beats
};

// Beats start at 0.2 s and follow
//   IBI = 60000 / hr + lf sin(2 pi 0.1 t) + hf sin(2 pi 0.25 t) + jitter,
// evaluated at the opening beat. Each beat is a Gaussian systolic pulse
// (sigma 80 ms) plus a 40 % dicrotic bump 250 ms later.
SynthPulse synth_ppg(const PulseSpec& spec);

// Same generator with a time-varying mean rate; spec.hr_mean is ignored.
SynthPulse synth_ppg(const PulseSpec& spec, const std::function<double(double)>& hr_at);

struct VideoPairSpec {
  double freq_a = 1.0;  // Hz, [0.66, 3]
  double freq_b = 1.5;
  std::size_t channels = 3;
  std::size_t frames = 900;
  std::size_t height = 8;
  std::size_t width = 8;
  double fs = 30.0;
  double pulse_amp = 1.0;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
};

// Channel 1 of each video carries pulse_amp * mask(h, w) * sin(2 pi f t + phase)
// with a smooth spatial mask and a seeded phase; every channel carries
// Gaussian noise of noise_std.
contrastive::VideoPair synth_video_pair(const VideoPairSpec& spec);

// A single video with the pulse at `freq`.
contrastive::VideoBlock synth_video(double freq, const VideoPairSpec& spec, std::uint64_t seed);

// Per-class generative parameters.
struct ClassProfile {
  double hr_mean = 72.0;      // bpm, centre of the per-recording rate
  double hr_spread = 2.0;     // bpm, sd of the per-recording rate
  double hr_wander = 0.0;     // bpm, sd of slow within-recording rate drift
  double lf_amp_ms = 30.0;
  double hf_amp_ms = 30.0;
  double jitter_ms = 15.0;
  double engagement_low = 0.0;   // interval means are drawn from this range
  double engagement_high = 0.0;
  double pose_offset = 0.0;      // added to head rotation (rad) and translation (x10 mm)
  double pose_energy = 0.0;      // sd of head movement
  double au_level = 0.0;         // mean intensity of engagement-linked AUs
};

struct DatasetSpec {
  std::size_t participants = 25;
  // Every participant contributes one recording per class; a recording
  // stays in its class throughout.
  std::size_t intervals_per_recording = 64;
  std::array<ClassProfile, 3> classes;
  double padding_s = 120.0;  // signal before and after the annotated span
  double ppg_fs = 50.0;
  double ppg_snr_db = 20.0;
  double engagement_noise = 1.0;  // max within-interval sd
  bool behavior = false;
  double behavior_fps = 2.0;
  std::uint64_t seed = 0;
};

// "easy": disjoint class rates (60, 75, 95 bpm), HRV only.
// "fusion": overlapping rates with class signal in head pose and AUs.
DatasetSpec preset(std::string_view name);

struct DatasetSummary {
  std::filesystem::path manifest;
  std::size_t recordings = 0;
  std::array<std::size_t, 3> intervals_per_class{};
};

// Writes ppg/, engagement/, behavior/ CSVs, labels.csv (one row per 5 s
// interval with its generating class) and manifest.json into out_dir.
// Recording r uses seed + r.
DatasetSummary synth_engagement_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

}  // namespace engage::synth
