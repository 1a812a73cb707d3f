#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace engage::annotation {

enum class EngagementClass : int { kLow = 0, kMedium = 1, kHigh = 2 };

inline constexpr int kNumClasses = 3;

std::string_view class_name(EngagementClass c);
EngagementClass parse_class(std::string_view name);

// Continuous engagement rating in [-10, 10], nominally 2 Hz.
struct EngagementTrack {
  std::vector<double> timestamps;
  std::vector<double> values;
};

// CSV `time_s,value`. Timestamps must increase strictly and values stay
// inside [-10, 10].
EngagementTrack read_engagement_csv(const std::filesystem::path& path);
void write_engagement_csv(const std::filesystem::path& path, const EngagementTrack& track);

struct TimeSpan {
  double begin = 0.0;
  double end = 0.0;

  double width() const { return end - begin; }
  bool contains(const TimeSpan& inner, double tol = 1e-9) const {
    return inner.begin >= begin - tol && inner.end <= end + tol;
  }
};

inline constexpr double kIntervalSeconds = 5.0;

struct IntervalStat {
  TimeSpan interval;
  double mean = 0.0;
  double stddev = 0.0;  // population (divisor n)
  std::size_t count = 0;
};

// Consecutive 5 s intervals from the first timestamp over samples in
// [start, end). The trailing partial interval is dropped; intervals holding
// no samples are skipped.
std::vector<IntervalStat> interval_stats(const EngagementTrack& track);

// Median of the pooled interval standard deviations.
double compute_median_threshold(std::span<const double> stds);

// [-10, 0) Low, [0, 5) Medium, [5, 10] High.
EngagementClass label_for_mean(double mean);

struct LabeledInterval {
  IntervalStat stat;
  EngagementClass label = EngagementClass::kMedium;
};

// Keeps intervals with stddev <= threshold and labels them by their mean.
std::vector<LabeledInterval> filter_and_label(std::span<const IntervalStat> intervals, double threshold);

inline constexpr std::array<int, 7> kHrvWindows = {60, 90, 120, 150, 180, 210, 240};
inline constexpr double kBfWindowSeconds = 2.0;

bool is_valid_hrv_window(int seconds);

struct ObservationSample {
  std::string recording_id;
  std::string participant_id;
  TimeSpan interval;
  double interval_mean = 0.0;
  double interval_std = 0.0;
  EngagementClass label = EngagementClass::kMedium;
  double center_s = 0.0;
  TimeSpan hrv_span;
  TimeSpan bf_span;
};

struct DroppedSample {
  ObservationSample sample;
  std::string reason;
};

struct WindowingResult {
  std::vector<ObservationSample> samples;
  std::vector<DroppedSample> dropped;
};

struct RecordingContext {
  std::string recording_id;
  std::string participant_id;
  TimeSpan recording_bounds;  // behavioural windows must fit here
  TimeSpan signal_bounds;     // HRV windows must fit here
};

// Centers an HRV window of hrv_window_s seconds and a 2 s behavioural window
// on each interval midpoint. Windows that leave the available bounds are
// dropped (never truncated) and reported with a reason.
WindowingResult build_observation_samples(std::span<const LabeledInterval> intervals, int hrv_window_s,
                                          const RecordingContext& context);

// One row per sample, kept and dropped, with a drop_reason column.
void write_samples_report(const std::filesystem::path& path, const WindowingResult& result);

}  // namespace engage::annotation
