#include "engage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "engage/annotation.hpp"
#include "engage/behavior.hpp"
#include "engage/csv.hpp"
#include "engage/error.hpp"
#include "engage/rng.hpp"

namespace engage::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFirstBeatS = 0.2;
constexpr double kPulseSigmaS = 0.080;
constexpr double kDicroticDelayS = 0.250;
constexpr double kDicroticGain = 0.4;

void check_pulse_spec(const PulseSpec& spec) {
  if (!(spec.duration_s > 0.0) || !std::isfinite(spec.duration_s)) {
    throw Error(ErrorCode::kInvalidSpec, "duration must be positive");
  }
  if (!(spec.fs >= 10.0) || !std::isfinite(spec.fs)) throw Error(ErrorCode::kInvalidSpec, "fs must be >= 10 Hz");
  if (!(spec.lf_amp_ms >= 0.0) || !(spec.hf_amp_ms >= 0.0) || !(spec.jitter_std_ms >= 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "modulation amplitudes and jitter must be non-negative");
  }
  if (std::isnan(spec.snr_db)) throw Error(ErrorCode::kInvalidSpec, "snr_db is NaN");
}

// Ornstein-Uhlenbeck drift on a 1 s grid, linearly interpolated.
class Wander {
 public:
  Wander(double sd, double duration_s, double tau_s, Rng& rng) : values_(static_cast<std::size_t>(duration_s) + 2, 0.0) {
    if (sd <= 0.0) return;
    const double a = std::exp(-1.0 / tau_s);
    const double step = sd * std::sqrt(1.0 - a * a);
    values_[0] = sd * rng.normal();
    for (std::size_t k = 1; k < values_.size(); ++k) values_[k] = a * values_[k - 1] + step * rng.normal();
  }

  double operator()(double t) const {
    const double clamped = std::clamp(t, 0.0, static_cast<double>(values_.size() - 1));
    const auto k = std::min(static_cast<std::size_t>(clamped), values_.size() - 2);
    const double frac = clamped - static_cast<double>(k);
    return values_[k] + frac * (values_[k + 1] - values_[k]);
  }

 private:
  std::vector<double> values_;
};

std::string two_digit(std::size_t v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::string lower_class_name(int c) {
  std::string name(annotation::class_name(static_cast<annotation::EngagementClass>(c)));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return name;
}

// Value range whose mean labels as class c.
std::pair<double, double> label_range(int c) {
  switch (c) {
    case 0: return {-10.0, -1e-3};
    case 1: return {0.0, 5.0 - 1e-3};
    default: return {5.0, 10.0};
  }
}

behavior::BehaviorTable make_behavior(const ClassProfile& profile, double begin_s, double end_s, double fps,
                                      double participant_offset, Rng& rng) {
  const auto& names = behavior::registered_columns();
  const auto frames = static_cast<std::size_t>(std::floor((end_s - begin_s) * fps)) + 1;
  Matrix values(frames, names.size());
  std::vector<double> times(frames);

  const auto col = [&](std::string_view name) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
  };
  const std::size_t gaze0 = col("gaze_0_x");
  const std::size_t angle0 = col("gaze_angle_x");
  const std::size_t lmk0 = col("eye_lmk_x_0");
  const std::size_t pose0 = col("pose_Tx");
  const std::size_t au_r0 = col("AU01_r");
  const std::size_t au_c0 = col("AU01_c");
  const std::size_t n_au = behavior::kActionUnitIds.size();

  // AUs that move with engagement: brow raisers, cheek raiser, lip corner puller.
  auto linked = [](std::string_view id) { return id == "01" || id == "02" || id == "06" || id == "12"; };

  std::array<double, 6> pose_state{};
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = begin_s + static_cast<double>(f) / fps;
    times[f] = t;
    auto row = values.row(f);
    for (std::size_t i = 0; i < 6; ++i) {
      const double base = (i % 3 == 2) ? -0.95 : 0.1 * (i % 3 == 0 ? 1.0 : -1.0);
      row[gaze0 + i] = base + 0.05 * rng.normal();
    }
    row[angle0] = 0.1 + 0.05 * rng.normal();
    row[angle0 + 1] = -0.05 + 0.05 * rng.normal();
    for (std::size_t i = 0; i < 280; ++i) {
      const std::size_t axis = i / 56;
      const double idx = static_cast<double>(i % 56);
      const double base = axis < 2 ? 300.0 + 2.0 * idx : (axis == 4 ? 480.0 + 0.2 * idx : 10.0 + 0.5 * idx);
      row[lmk0 + i] = base + 0.5 * rng.normal();
    }
    const double offset = profile.pose_offset + participant_offset;
    for (std::size_t i = 0; i < 6; ++i) {
      // Slowly varying head movement whose size depends on the class.
      pose_state[i] = 0.8 * pose_state[i] + profile.pose_energy * 0.6 * rng.normal();
      const double translation_scale = i < 3 ? 10.0 : 1.0;
      const double rest = i == 2 ? 500.0 : 0.0;
      row[pose0 + i] = rest + translation_scale * (offset + pose_state[i]);
    }
    for (std::size_t a = 0; a < n_au; ++a) {
      const double level = linked(behavior::kActionUnitIds[a]) ? profile.au_level : 0.3;
      const double r = std::clamp(level + 0.4 * rng.normal(), 0.0, 5.0);
      row[au_r0 + a] = r;
      row[au_c0 + a] = r > 1.0 ? 1.0 : 0.0;
    }
  }
  return behavior::BehaviorTable::from_columns(std::move(times), std::move(values));
}

}  // namespace

SynthPulse synth_ppg(const PulseSpec& spec) {
  if (!(spec.hr_mean >= 40.0 && spec.hr_mean <= 180.0)) {
    throw Error(ErrorCode::kInvalidSpec, "hr_mean must lie in [40, 180] bpm");
  }
  if (spec.lf_amp_ms + spec.hf_amp_ms >= 60000.0 / spec.hr_mean) {
    throw Error(ErrorCode::kInvalidSpec, "modulation amplitudes allow non-positive intervals");
  }
  const double hr = spec.hr_mean;
  return synth_ppg(spec, [hr](double) { return hr; });
}

SynthPulse synth_ppg(const PulseSpec& spec, const std::function<double(double)>& hr_at) {
  check_pulse_spec(spec);
  Rng rng(spec.seed);
  SynthPulse out;
  for (double t = kFirstBeatS; t < spec.duration_s;) {
    out.beat_times.push_back(t);
    const double hr = hr_at(t);
    if (!(hr > 0.0)) throw Error(ErrorCode::kInvalidSpec, "heart rate must stay positive");
    double ibi = 60000.0 / hr + spec.lf_amp_ms * std::sin(kTwoPi * 0.1 * t) +
                 spec.hf_amp_ms * std::sin(kTwoPi * 0.25 * t);
    if (spec.jitter_std_ms > 0.0) ibi += spec.jitter_std_ms * rng.normal();
    if (!(ibi > 0.0)) {
      throw Error(ErrorCode::kInvalidSpec, "modulation produced a non-positive interval at t = " + std::to_string(t));
    }
    t += ibi / 1000.0;
  }

  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));
  out.ppg.fs = spec.fs;
  out.ppg.values.assign(n, 0.0);
  const double reach = 4.0 * kPulseSigmaS;
  const double inv_two_var = 1.0 / (2.0 * kPulseSigmaS * kPulseSigmaS);
  for (const double beat : out.beat_times) {
    const auto first = static_cast<std::ptrdiff_t>(std::ceil((beat - reach) * spec.fs));
    const auto last = static_cast<std::ptrdiff_t>(std::floor((beat + kDicroticDelayS + reach) * spec.fs));
    for (auto i = std::max<std::ptrdiff_t>(first, 0); i <= last && i < static_cast<std::ptrdiff_t>(n); ++i) {
      const double t = static_cast<double>(i) / spec.fs;
      const double d1 = t - beat;
      const double d2 = t - beat - kDicroticDelayS;
      out.ppg.values[static_cast<std::size_t>(i)] +=
          std::exp(-d1 * d1 * inv_two_var) + kDicroticGain * std::exp(-d2 * d2 * inv_two_var);
    }
  }

  if (std::isfinite(spec.snr_db) && n > 0) {
    double mean = 0.0;
    for (const double v : out.ppg.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double v : out.ppg.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double noise_sd = std::sqrt(var / std::pow(10.0, spec.snr_db / 10.0));
    for (auto& v : out.ppg.values) v += noise_sd * rng.normal();
  }

  for (std::size_t i = 1; i < out.beat_times.size(); ++i) {
    out.ibis.intervals_ms.push_back(1000.0 * (out.beat_times[i] - out.beat_times[i - 1]));
    out.ibis.onset_s.push_back(out.beat_times[i - 1]);
  }
  return out;
}

contrastive::VideoBlock synth_video(double freq, const VideoPairSpec& spec, std::uint64_t seed) {
  if (!(freq >= signal::kHeartRateBand.low && freq <= signal::kHeartRateBand.high)) {
    throw Error(ErrorCode::kInvalidSpec, "pulse frequency must lie in [0.66, 3] Hz");
  }
  if (!(spec.pulse_amp >= 0.0) || !(spec.noise_std >= 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "pulse amplitude and noise must be non-negative");
  }
  if (spec.channels < 2) throw Error(ErrorCode::kInvalidSpec, "the pulse channel needs at least two channels");
  if (!(spec.fs > 0.0)) throw Error(ErrorCode::kInvalidSpec, "fs must be positive");

  Rng rng(seed);
  contrastive::VideoBlock video(spec.channels, spec.frames, spec.height, spec.width, spec.fs);
  const double phase = kTwoPi * rng.uniform();
  const double cy = 0.5 * static_cast<double>(spec.height - 1);
  const double cx = 0.5 * static_cast<double>(spec.width - 1);
  const double scale = 0.5 * static_cast<double>(std::max(spec.height, spec.width));
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double pulse = spec.pulse_amp * std::sin(kTwoPi * freq * static_cast<double>(t) / spec.fs + phase);
    for (std::size_t h = 0; h < spec.height; ++h) {
      for (std::size_t w = 0; w < spec.width; ++w) {
        const double dy = static_cast<double>(h) - cy;
        const double dx = static_cast<double>(w) - cx;
        video.at(1, t, h, w) = pulse * (0.5 + 0.5 * std::exp(-(dx * dx + dy * dy) / (2.0 * scale * scale)));
      }
    }
  }
  if (spec.noise_std > 0.0) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t h = 0; h < spec.height; ++h) {
          for (std::size_t w = 0; w < spec.width; ++w) video.at(c, t, h, w) += spec.noise_std * rng.normal();
        }
      }
    }
  }
  return video;
}

contrastive::VideoPair synth_video_pair(const VideoPairSpec& spec) {
  return {synth_video(spec.freq_a, spec, derive_seed(spec.seed, 0)),
          synth_video(spec.freq_b, spec, derive_seed(spec.seed, 1))};
}

DatasetSpec preset(std::string_view name) {
  DatasetSpec spec;
  if (name == "easy") {
    spec.classes[0] = {60.0, 2.0, 3.0, 30.0, 40.0, 15.0, -8.0, -2.0, 0.0, 0.0, 0.0};
    spec.classes[1] = {75.0, 2.0, 3.0, 30.0, 30.0, 15.0, 1.0, 4.0, 0.0, 0.0, 0.0};
    spec.classes[2] = {95.0, 2.0, 3.0, 25.0, 20.0, 12.0, 6.0, 9.0, 0.0, 0.0, 0.0};
    return spec;
  }
  if (name == "fusion") {
    spec.participants = 12;
    spec.intervals_per_recording = 40;
    spec.behavior = true;
    spec.classes[0] = {72.0, 5.0, 4.0, 30.0, 30.0, 15.0, -8.0, -2.0, -0.15, 0.08, 0.6};
    spec.classes[1] = {75.0, 5.0, 4.0, 30.0, 30.0, 15.0, 1.0, 4.0, 0.0, 0.05, 1.5};
    spec.classes[2] = {78.0, 5.0, 4.0, 30.0, 30.0, 15.0, 6.0, 9.0, 0.15, 0.03, 2.5};
    return spec;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown dataset preset '" + std::string(name) + "' (easy, fusion)");
}

DatasetSummary synth_engagement_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.participants == 0 || spec.intervals_per_recording == 0) {
    throw Error(ErrorCode::kInvalidSpec, "dataset needs at least one participant and one interval");
  }
  if (!(spec.padding_s >= 0.0) || !(spec.engagement_noise >= 0.0) || !(spec.behavior_fps > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "padding, noise and fps must be non-negative");
  }
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& p = spec.classes[c];
    const auto [lo, hi] = label_range(static_cast<int>(c));
    if (p.engagement_low < lo || p.engagement_high > hi || p.engagement_low > p.engagement_high) {
      throw Error(ErrorCode::kInvalidSpec, "engagement range of class " + std::to_string(c) + " leaves its label");
    }
  }
  try {
    std::filesystem::create_directories(out_dir / "ppg");
    std::filesystem::create_directories(out_dir / "engagement");
    if (spec.behavior) std::filesystem::create_directories(out_dir / "behavior");
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::kIo, std::string("cannot create dataset directory: ") + e.what());
  }

  const double track_s = annotation::kIntervalSeconds * static_cast<double>(spec.intervals_per_recording);
  const double total_s = track_s + 2.0 * spec.padding_s;
  constexpr double kEngagementHz = 2.0;
  const auto samples_per_interval = static_cast<std::size_t>(annotation::kIntervalSeconds * kEngagementHz);

  DatasetSummary summary;
  nlohmann::ordered_json recordings = nlohmann::ordered_json::array();
  std::string labels = "recording_id,participant_id,interval_start_s,interval_end_s,label\n";

  for (std::size_t p = 0; p < spec.participants; ++p) {
    const std::string participant = "p" + two_digit(p + 1);
    Rng participant_rng(derive_seed(spec.seed, 0xB0D1, p));
    const double participant_offset = 0.05 * participant_rng.normal();
    for (int c = 0; c < 3; ++c) {
      const std::size_t r = p * 3 + static_cast<std::size_t>(c);
      const auto& profile = spec.classes[static_cast<std::size_t>(c)];
      const std::string id = participant + "_" + lower_class_name(c);
      Rng rng(spec.seed + r);

      const double base_hr = profile.hr_mean + profile.hr_spread * rng.normal();
      const Wander wander(profile.hr_wander, total_s, 60.0, rng);
      PulseSpec pulse;
      pulse.lf_amp_ms = profile.lf_amp_ms;
      pulse.hf_amp_ms = profile.hf_amp_ms;
      pulse.jitter_std_ms = profile.jitter_ms;
      pulse.duration_s = total_s;
      pulse.fs = spec.ppg_fs;
      pulse.snr_db = spec.ppg_snr_db;
      pulse.seed = derive_seed(spec.seed + r, 1);
      const auto ppg = synth_ppg(pulse, [&](double t) { return std::clamp(base_hr + wander(t), 40.0, 180.0); });
      signal::write_signal_csv(out_dir / "ppg" / (id + ".csv"), ppg.ppg);

      annotation::EngagementTrack track;
      const auto [lo, hi] = label_range(c);
      for (std::size_t k = 0; k < spec.intervals_per_recording; ++k) {
        const double mean = rng.uniform(profile.engagement_low, profile.engagement_high);
        const double sd = rng.uniform(0.05, std::max(0.05, spec.engagement_noise));
        for (std::size_t s = 0; s < samples_per_interval; ++s) {
          const double t = spec.padding_s + static_cast<double>(k * samples_per_interval + s) / kEngagementHz;
          track.timestamps.push_back(t);
          track.values.push_back(std::clamp(mean + sd * rng.normal(), lo, hi));
        }
        const double start = spec.padding_s + annotation::kIntervalSeconds * static_cast<double>(k);
        labels += csv::join({id, participant, csv::format_double(start),
                             csv::format_double(start + annotation::kIntervalSeconds),
                             std::string(annotation::class_name(static_cast<annotation::EngagementClass>(c)))});
        labels.push_back('\n');
      }
      summary.intervals_per_class[static_cast<std::size_t>(c)] += spec.intervals_per_recording;
      annotation::write_engagement_csv(out_dir / "engagement" / (id + ".csv"), track);

      nlohmann::ordered_json entry;
      entry["id"] = id;
      entry["participant"] = participant;
      entry["ppg_csv"] = "ppg/" + id + ".csv";
      entry["engagement_csv"] = "engagement/" + id + ".csv";
      if (spec.behavior) {
        Rng behavior_rng(derive_seed(spec.seed + r, 2));
        const auto table = make_behavior(profile, spec.padding_s - annotation::kBfWindowSeconds,
                                         spec.padding_s + track_s + annotation::kBfWindowSeconds, spec.behavior_fps,
                                         participant_offset, behavior_rng);
        behavior::write_behavior_csv(out_dir / "behavior" / (id + ".csv"), table, 4);
        entry["behavior_csv"] = "behavior/" + id + ".csv";
      } else {
        entry["behavior_csv"] = nullptr;
      }
      entry["fps"] = spec.behavior_fps;
      recordings.push_back(std::move(entry));
      ++summary.recordings;
    }
  }

  csv::write_text_file(out_dir / "labels.csv", labels);
  nlohmann::ordered_json manifest;
  manifest["recordings"] = std::move(recordings);
  summary.manifest = out_dir / "manifest.json";
  csv::write_text_file(summary.manifest, manifest.dump(2) + "\n");
  return summary;
}

}  // namespace engage::synth
