#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "engage/signal.hpp"

namespace engage::hrv {

// Systolic peak times in seconds, strictly increasing.
struct PeakList {
  std::vector<double> times;
};

// Inter-beat intervals. onset_s[i] is the time of the peak that opens
// interval i.
struct IbiSeries {
  std::vector<double> intervals_ms;
  std::vector<double> onset_s;
  // Width of the observation window the series was cut from; 0 when the
  // series is not tied to a window.
  double window_s = 0.0;

  std::size_t size() const { return intervals_ms.size(); }
};

struct PeakDetectorOptions {
  signal::Band band{0.5, 3.0};
  double peak_window_s = 0.111;
  double beat_window_s = 0.667;
  double threshold_offset = 0.02;  // fraction of the mean squared signal
  double refractory_s = 0.333;
};

// Two-moving-average systolic peak detector on the clipped, squared,
// bandpassed pulse.
PeakList detect_peaks(const signal::SampledSignal& ppg, const PeakDetectorOptions& options = {});

IbiSeries compute_ibis(const PeakList& peaks);

// Peaks falling inside [begin_s, end_s], converted to intervals.
IbiSeries ibis_in_span(const PeakList& peaks, double begin_s, double end_s);

// Intervals outside [min_ms, max_ms] are physiologically implausible. They
// are only removed when drop_implausible is set.
struct IbiPolicy {
  bool drop_implausible = false;
  double min_ms = 300.0;
  double max_ms = 2000.0;
};
std::vector<std::size_t> implausible_intervals(const IbiSeries& ibi, const IbiPolicy& policy = {});
IbiSeries apply_policy(const IbiSeries& ibi, const IbiPolicy& policy);

inline constexpr std::size_t kPoincareCount = 3;
inline constexpr std::size_t kTimeCount = 16;
inline constexpr std::size_t kFrequencyCount = 5;
inline constexpr std::size_t kFeatureCount = kPoincareCount + kTimeCount + kFrequencyCount;

// Histogram bin width used by HTI and TINN.
inline constexpr double kHistogramBinMs = 1000.0 / 128.0;

// [SD1, SD2, SD1/SD2]
std::array<double, kPoincareCount> hrv_poincare(const IbiSeries& ibi);

// [MeanNN, SDNN, RMSSD, SDSD, CVNN, CVSD, MedianNN, MadNN, MCVNN, IQRNN,
//  pNN50, pNN20, MinNN, MaxNN, HTI, TINN]
std::array<double, kTimeCount> hrv_time(const IbiSeries& ibi);

// [LF, HF, LF/HF, LFn, HFn] from the tachogram resampled at 4 Hz. The
// covered duration is window_s when set, else the summed intervals.
std::array<double, kFrequencyCount> hrv_freq(const IbiSeries& ibi);

struct HrvFeatureVector {
  std::array<double, kFeatureCount> values{};

  static const std::array<std::string_view, kFeatureCount>& names();
  double operator[](std::size_t i) const { return values[i]; }
};

HrvFeatureVector hrv_all(const IbiSeries& ibi);
double mean_hr(const IbiSeries& ibi);

// Tachogram interpolation rate and band edges.
inline constexpr double kTachogramHz = 4.0;
inline constexpr signal::Band kLfBand{0.04, 0.15};
inline constexpr signal::Band kHfBand{0.15, 0.40};

// Minimum spanned duration for the frequency-domain features.
inline constexpr double kMinFrequencyDurationS = 60.0;

}  // namespace engage::hrv
