#include "engage/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "engage/csv.hpp"
#include "engage/error.hpp"

namespace engage::annotation {

namespace {

std::string span_text(const TimeSpan& span) {
  std::ostringstream out;
  out << '[' << span.begin << ", " << span.end << ']';
  return out.str();
}

}  // namespace

std::string_view class_name(EngagementClass c) {
  switch (c) {
    case EngagementClass::kLow: return "Low";
    case EngagementClass::kMedium: return "Medium";
    case EngagementClass::kHigh: return "High";
  }
  return "?";
}

EngagementClass parse_class(std::string_view name) {
  if (name == "Low" || name == "0") return EngagementClass::kLow;
  if (name == "Medium" || name == "1") return EngagementClass::kMedium;
  if (name == "High" || name == "2") return EngagementClass::kHigh;
  throw Error(ErrorCode::kParse, "unknown engagement class '" + std::string(name) + "'");
}

EngagementTrack read_engagement_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto time_col = table.require("time_s");
  const auto value_col = table.require("value");
  EngagementTrack track;
  track.timestamps.reserve(table.rows.size());
  track.values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double t = csv::parse_double(table.rows[r][time_col], r + 1, "time_s");
    const double v = csv::parse_double(table.rows[r][value_col], r + 1, "value");
    if (!track.timestamps.empty() && !(t > track.timestamps.back())) {
      throw Error(ErrorCode::kParse, path.string() + ": timestamps must increase (row " +
                                         std::to_string(r + 1) + ")");
    }
    if (v < -10.0 || v > 10.0) {
      throw Error(ErrorCode::kParse, path.string() + ": engagement value outside [-10, 10] at row " +
                                         std::to_string(r + 1));
    }
    track.timestamps.push_back(t);
    track.values.push_back(v);
  }
  return track;
}

void write_engagement_csv(const std::filesystem::path& path, const EngagementTrack& track) {
  std::string text = "time_s,value\n";
  for (std::size_t i = 0; i < track.timestamps.size(); ++i) {
    text += csv::format_double(track.timestamps[i], 10);
    text.push_back(',');
    text += csv::format_double(track.values[i], 6);
    text.push_back('\n');
  }
  csv::write_text_file(path, text);
}

std::vector<IntervalStat> interval_stats(const EngagementTrack& track) {
  const auto& ts = track.timestamps;
  if (ts.size() != track.values.size()) throw Error(ErrorCode::kShape, "timestamps and values differ in length");
  if (ts.size() < 2) throw Error(ErrorCode::kTooShort, "engagement track needs at least two samples");

  std::vector<double> deltas(ts.size() - 1);
  for (std::size_t i = 1; i < ts.size(); ++i) deltas[i - 1] = ts[i] - ts[i - 1];
  std::nth_element(deltas.begin(), deltas.begin() + deltas.size() / 2, deltas.end());
  const double period = deltas[deltas.size() / 2];
  const double duration = ts.back() - ts.front() + period;
  if (duration < kIntervalSeconds - 1e-9) {
    throw Error(ErrorCode::kTooShort, "engagement track covers " + std::to_string(duration) +
                                          " s, shorter than one interval");
  }
  const auto n_intervals = static_cast<std::size_t>(std::floor(duration / kIntervalSeconds + 1e-9));

  std::vector<IntervalStat> out;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n_intervals; ++k) {
    const double start = ts.front() + kIntervalSeconds * static_cast<double>(k);
    const double end = start + kIntervalSeconds;
    const double eps = 1e-9;
    while (i < ts.size() && ts[i] < start - eps) ++i;
    double sum = 0.0;
    std::size_t count = 0;
    std::size_t j = i;
    for (; j < ts.size() && ts[j] < end - eps; ++j) {
      sum += track.values[j];
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t m = i; m < j; ++m) sq += (track.values[m] - mean) * (track.values[m] - mean);
    out.push_back({{start, end}, mean, std::sqrt(sq / static_cast<double>(count)), count});
    i = j;
  }
  return out;
}

double compute_median_threshold(std::span<const double> stds) {
  if (stds.empty()) throw Error(ErrorCode::kEmptyInput, "median of an empty list");
  std::vector<double> sorted(stds.begin(), stds.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

EngagementClass label_for_mean(double mean) {
  if (mean < 0.0) return EngagementClass::kLow;
  if (mean < 5.0) return EngagementClass::kMedium;
  return EngagementClass::kHigh;
}

std::vector<LabeledInterval> filter_and_label(std::span<const IntervalStat> intervals, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must be non-negative");
  std::vector<LabeledInterval> out;
  for (const auto& stat : intervals) {
    if (stat.stddev <= threshold) out.push_back({stat, label_for_mean(stat.mean)});
  }
  return out;
}

bool is_valid_hrv_window(int seconds) {
  return std::find(kHrvWindows.begin(), kHrvWindows.end(), seconds) != kHrvWindows.end();
}

WindowingResult build_observation_samples(std::span<const LabeledInterval> intervals, int hrv_window_s,
                                          const RecordingContext& context) {
  if (!is_valid_hrv_window(hrv_window_s)) {
    throw Error(ErrorCode::kInvalidWindow, "HRV window must be one of 60, 90, ..., 240 s; got " +
                                               std::to_string(hrv_window_s));
  }
  const double half = 0.5 * static_cast<double>(hrv_window_s);
  const double bf_half = 0.5 * kBfWindowSeconds;
  WindowingResult result;
  for (const auto& labeled : intervals) {
    ObservationSample s;
    s.recording_id = context.recording_id;
    s.participant_id = context.participant_id;
    s.interval = labeled.stat.interval;
    s.interval_mean = labeled.stat.mean;
    s.interval_std = labeled.stat.stddev;
    s.label = labeled.label;
    s.center_s = 0.5 * (s.interval.begin + s.interval.end);
    s.hrv_span = {s.center_s - half, s.center_s + half};
    s.bf_span = {s.center_s - bf_half, s.center_s + bf_half};

    std::string reason;
    if (!context.recording_bounds.contains(s.hrv_span)) {
      reason = "hrv window " + span_text(s.hrv_span) + " outside recording " + span_text(context.recording_bounds);
    } else if (!context.signal_bounds.contains(s.hrv_span)) {
      reason = "hrv window " + span_text(s.hrv_span) + " outside signal " + span_text(context.signal_bounds);
    } else if (!context.recording_bounds.contains(s.bf_span)) {
      reason = "bf window " + span_text(s.bf_span) + " outside recording " + span_text(context.recording_bounds);
    }
    if (reason.empty()) {
      result.samples.push_back(std::move(s));
    } else {
      result.dropped.push_back({std::move(s), std::move(reason)});
    }
  }
  return result;
}

void write_samples_report(const std::filesystem::path& path, const WindowingResult& result) {
  std::string text =
      "recording_id,participant_id,interval_start_s,interval_end_s,interval_mean,interval_std,label,"
      "center_s,hrv_begin_s,hrv_end_s,bf_begin_s,bf_end_s,status,drop_reason\n";
  auto row = [&text](const ObservationSample& s, std::string_view status, std::string reason) {
    std::replace(reason.begin(), reason.end(), ',', ';');
    text += csv::join({s.recording_id, s.participant_id, csv::format_double(s.interval.begin),
                       csv::format_double(s.interval.end), csv::format_double(s.interval_mean),
                       csv::format_double(s.interval_std), std::string(class_name(s.label)),
                       csv::format_double(s.center_s), csv::format_double(s.hrv_span.begin),
                       csv::format_double(s.hrv_span.end), csv::format_double(s.bf_span.begin),
                       csv::format_double(s.bf_span.end), std::string(status), reason});
    text.push_back('\n');
  };
  for (const auto& s : result.samples) row(s, "kept", "");
  for (const auto& d : result.dropped) row(d.sample, "dropped", d.reason);
  csv::write_text_file(path, text);
}

}  // namespace engage::annotation
