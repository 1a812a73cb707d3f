#include "engage/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "engage/error.hpp"

namespace engage::hrv {

namespace {

// Centered moving average; the window is clipped at the signal edges.
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  const std::size_t before = (window - 1) / 2;
  const std::size_t after = window / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n, i + after + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  const double mean = mean_of(x);
  double sum = 0.0;
  for (double v : x) sum += (v - mean) * (v - mean);
  return std::sqrt(sum / static_cast<double>(x.size() - 1));
}

double median_of(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// Linear-interpolation quantile on sorted data, position (n - 1) * q.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

struct Histogram {
  std::vector<double> counts;
  std::size_t mode = 0;
};

Histogram nn_histogram(std::span<const double> nn, double min_nn, double max_nn) {
  const auto bins = static_cast<std::size_t>(std::floor((max_nn - min_nn) / kHistogramBinMs)) + 1;
  Histogram hist;
  hist.counts.assign(bins, 0.0);
  for (double v : nn) {
    auto b = static_cast<std::size_t>(std::floor((v - min_nn) / kHistogramBinMs));
    hist.counts[std::min(b, bins - 1)] += 1.0;
  }
  for (std::size_t b = 1; b < bins; ++b) {
    if (hist.counts[b] > hist.counts[hist.mode]) hist.mode = b;
  }
  return hist;
}

// One side of the triangular fit. The triangle rises linearly from zero at
// `reach` bins away from the mode to the mode height; the squared residual
// over the bins on this side depends only on that reach, so each side is
// fitted on its own. Returns the best reach in bins, smallest on ties.
std::size_t best_reach(const Histogram& hist, bool left) {
  const double peak = hist.counts[hist.mode];
  const std::size_t available = left ? hist.mode : hist.counts.size() - 1 - hist.mode;
  std::size_t best = 1;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t reach = 1; reach <= available + 1; ++reach) {
    double err = 0.0;
    for (std::size_t offset = 1; offset <= available; ++offset) {
      const std::size_t b = left ? hist.mode - offset : hist.mode + offset;
      const double fit = peak * std::max(0.0, 1.0 - static_cast<double>(offset) / static_cast<double>(reach));
      err += (hist.counts[b] - fit) * (hist.counts[b] - fit);
    }
    if (err < best_err) {
      best_err = err;
      best = reach;
    }
  }
  return best;
}

void require_intervals(const IbiSeries& ibi, std::size_t minimum) {
  if (ibi.intervals_ms.size() < minimum) {
    throw Error(ErrorCode::kInsufficientData, "need at least " + std::to_string(minimum) +
                                                  " intervals, got " +
                                                  std::to_string(ibi.intervals_ms.size()));
  }
}

std::vector<double> successive_differences(std::span<const double> nn) {
  std::vector<double> diffs(nn.size() - 1);
  for (std::size_t i = 1; i < nn.size(); ++i) diffs[i - 1] = nn[i] - nn[i - 1];
  return diffs;
}

}  // namespace

PeakList detect_peaks(const signal::SampledSignal& ppg, const PeakDetectorOptions& options) {
  if (!(ppg.fs >= 10.0)) {
    throw Error(ErrorCode::kInvalidArgument, "peak detection needs fs >= 10 Hz, got " + std::to_string(ppg.fs));
  }
  if (ppg.duration() < 10.0) {
    throw Error(ErrorCode::kTooShort, "peak detection needs at least 10 s, got " +
                                          std::to_string(ppg.duration()) + " s");
  }
  const auto filtered = signal::bandpass(ppg, options.band);
  const auto& x = filtered.values;
  std::vector<double> squared(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double clipped = std::max(0.0, x[i]);
    squared[i] = clipped * clipped;
  }
  const auto peak_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.peak_window_s * ppg.fs)));
  const auto beat_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.beat_window_s * ppg.fs)));
  const auto ma_peak = moving_average(squared, peak_len);
  const auto ma_beat = moving_average(squared, beat_len);
  const double offset = options.threshold_offset * mean_of(squared);

  std::vector<std::size_t> candidates;
  std::size_t i = 0;
  while (i < x.size()) {
    if (!(ma_peak[i] > ma_beat[i] + offset)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < x.size() && ma_peak[i] > ma_beat[i] + offset) ++i;
    if (i - start < peak_len) continue;
    std::size_t best = start;
    for (std::size_t j = start + 1; j < i; ++j) {
      if (x[j] > x[best]) best = j;
    }
    candidates.push_back(best);
  }

  std::vector<std::size_t> kept;
  for (std::size_t idx : candidates) {
    if (!kept.empty() && static_cast<double>(idx - kept.back()) / ppg.fs < options.refractory_s) {
      if (x[idx] > x[kept.back()]) kept.back() = idx;
      continue;
    }
    kept.push_back(idx);
  }

  PeakList peaks;
  peaks.times.reserve(kept.size());
  for (std::size_t idx : kept) peaks.times.push_back(ppg.time_at(idx));
  return peaks;
}

IbiSeries compute_ibis(const PeakList& peaks) {
  if (peaks.times.size() < 2) {
    throw Error(ErrorCode::kInsufficientPeaks, "need at least two peaks, got " +
                                                   std::to_string(peaks.times.size()));
  }
  IbiSeries ibi;
  ibi.intervals_ms.reserve(peaks.times.size() - 1);
  ibi.onset_s.reserve(peaks.times.size() - 1);
  for (std::size_t i = 1; i < peaks.times.size(); ++i) {
    ibi.intervals_ms.push_back((peaks.times[i] - peaks.times[i - 1]) * 1000.0);
    ibi.onset_s.push_back(peaks.times[i - 1]);
  }
  return ibi;
}

IbiSeries ibis_in_span(const PeakList& peaks, double begin_s, double end_s) {
  const auto first = std::lower_bound(peaks.times.begin(), peaks.times.end(), begin_s);
  const auto last = std::upper_bound(peaks.times.begin(), peaks.times.end(), end_s);
  PeakList inside;
  if (first < last) inside.times.assign(first, last);
  auto ibi = compute_ibis(inside);
  ibi.window_s = end_s - begin_s;
  return ibi;
}

std::vector<std::size_t> implausible_intervals(const IbiSeries& ibi, const IbiPolicy& policy) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ibi.intervals_ms.size(); ++i) {
    const double v = ibi.intervals_ms[i];
    if (v < policy.min_ms || v > policy.max_ms) out.push_back(i);
  }
  return out;
}

IbiSeries apply_policy(const IbiSeries& ibi, const IbiPolicy& policy) {
  if (!policy.drop_implausible) return ibi;
  IbiSeries out;
  out.window_s = ibi.window_s;
  for (std::size_t i = 0; i < ibi.intervals_ms.size(); ++i) {
    const double v = ibi.intervals_ms[i];
    if (v < policy.min_ms || v > policy.max_ms) continue;
    out.intervals_ms.push_back(v);
    out.onset_s.push_back(ibi.onset_s[i]);
  }
  return out;
}

std::array<double, kTimeCount> hrv_time(const IbiSeries& ibi) {
  require_intervals(ibi, 3);
  const auto& nn = ibi.intervals_ms;
  const auto diffs = successive_differences(nn);
  const double n_diffs = static_cast<double>(diffs.size());

  const double mean_nn = mean_of(nn);
  const double sdnn = sample_std(nn);
  double sq = 0.0;
  for (double d : diffs) sq += d * d;
  const double rmssd = std::sqrt(sq / n_diffs);
  const double sdsd = sample_std(diffs);

  auto sorted = nn;
  std::sort(sorted.begin(), sorted.end());
  const double median_nn = median_of(sorted);
  std::vector<double> deviations(nn.size());
  for (std::size_t i = 0; i < nn.size(); ++i) deviations[i] = std::abs(nn[i] - median_nn);
  const double mad_nn = 1.4826 * median_of(deviations);
  const double iqr_nn = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  double over50 = 0.0;
  double over20 = 0.0;
  for (double d : diffs) {
    if (std::abs(d) > 50.0) over50 += 1.0;
    if (std::abs(d) > 20.0) over20 += 1.0;
  }

  const double min_nn = sorted.front();
  const double max_nn = sorted.back();
  const auto hist = nn_histogram(nn, min_nn, max_nn);
  const double hti = static_cast<double>(nn.size()) / hist.counts[hist.mode];
  const auto occupied = std::count_if(hist.counts.begin(), hist.counts.end(), [](double c) { return c > 0.0; });
  double tinn = 0.0;
  if (occupied > 1) {
    const auto reach = best_reach(hist, true) + best_reach(hist, false);
    tinn = static_cast<double>(reach) * kHistogramBinMs;
  }

  return {mean_nn,
          sdnn,
          rmssd,
          sdsd,
          sdnn / mean_nn,
          rmssd / mean_nn,
          median_nn,
          mad_nn,
          mad_nn / median_nn,
          iqr_nn,
          100.0 * over50 / n_diffs,
          100.0 * over20 / n_diffs,
          min_nn,
          max_nn,
          hti,
          tinn};
}

std::array<double, kFrequencyCount> hrv_freq(const IbiSeries& ibi) {
  require_intervals(ibi, 3);
  if (ibi.onset_s.size() != ibi.intervals_ms.size()) {
    throw Error(ErrorCode::kShape, "interval and onset counts differ");
  }
  const double span_s = ibi.window_s > 0.0
                            ? ibi.window_s
                            : std::accumulate(ibi.intervals_ms.begin(), ibi.intervals_ms.end(), 0.0) / 1000.0;
  if (span_s < kMinFrequencyDurationS - 1e-9) {
    throw Error(ErrorCode::kInsufficientDuration, "frequency features need " +
                                                      std::to_string(kMinFrequencyDurationS) +
                                                      " s of intervals, got " + std::to_string(span_s) + " s");
  }

  // Tachogram: interval value against onset time, linearly resampled.
  const auto& t = ibi.onset_s;
  const auto& v = ibi.intervals_ms;
  const double step = 1.0 / kTachogramHz;
  std::vector<double> grid;
  std::size_t seg = 0;
  for (std::size_t g = 0;; ++g) {
    const double tg = t.front() + static_cast<double>(g) * step;
    if (tg > t.back() + 1e-12) break;
    while (seg + 2 < t.size() && tg > t[seg + 1]) ++seg;
    const double span = t[seg + 1] - t[seg];
    const double frac = span > 0.0 ? (tg - t[seg]) / span : 0.0;
    grid.push_back(v[seg] + (v[seg + 1] - v[seg]) * std::clamp(frac, 0.0, 1.0));
  }

  auto x = signal::centered(grid);
  const auto window = signal::hann_window(x.size());
  double window_energy = 0.0;
  for (std::size_t m = 0; m < x.size(); ++m) {
    x[m] *= window[m];
    window_energy += window[m] * window[m];
  }
  const std::size_t padded = signal::padded_length(x.size());
  const auto spectrum = signal::real_dft(x, padded);
  const double df = kTachogramHz / static_cast<double>(padded);

  // One-sided density (ms^2 / Hz), integrated with the trapezoid rule over
  // bins in [low, high).
  auto band_power = [&](signal::Band band) {
    double area = 0.0;
    double prev = 0.0;
    bool have_prev = false;
    for (std::size_t k = 1; k < spectrum.size(); ++k) {
      const double f = static_cast<double>(k) * df;
      if (f < band.low - 1e-12) continue;
      if (f >= band.high - 1e-12) break;
      const double density = 2.0 * std::norm(spectrum[k]) / (kTachogramHz * window_energy);
      if (have_prev) area += 0.5 * (prev + density) * df;
      prev = density;
      have_prev = true;
    }
    return area;
  };
  const double lf = band_power(kLfBand);
  const double hf = band_power(kHfBand);
  const double total = lf + hf;
  if (!(total > 0.0) || !(hf > 0.0)) {
    throw Error(ErrorCode::kDegenerateSpectrum, "no LF/HF power in the tachogram");
  }
  return {lf, hf, lf / hf, lf / total, hf / total};
}

std::array<double, kPoincareCount> hrv_poincare(const IbiSeries& ibi) {
  require_intervals(ibi, 3);
  const auto& nn = ibi.intervals_ms;
  const double sdnn = sample_std(nn);
  const double sdsd = sample_std(successive_differences(nn));
  const double sd1 = sdsd / std::numbers::sqrt2;
  const double sd2 = std::sqrt(std::max(0.0, 2.0 * sdnn * sdnn - sd1 * sd1));
  return {sd1, sd2, sd2 == 0.0 ? 0.0 : sd1 / sd2};
}

const std::array<std::string_view, kFeatureCount>& HrvFeatureVector::names() {
  static const std::array<std::string_view, kFeatureCount> kNames = {
      "HRV_SD1",    "HRV_SD2",    "HRV_SD1SD2", "HRV_MeanNN", "HRV_SDNN",  "HRV_RMSSD",
      "HRV_SDSD",   "HRV_CVNN",   "HRV_CVSD",   "HRV_MedianNN", "HRV_MadNN", "HRV_MCVNN",
      "HRV_IQRNN",  "HRV_pNN50",  "HRV_pNN20",  "HRV_MinNN",  "HRV_MaxNN", "HRV_HTI",
      "HRV_TINN",   "HRV_LF",     "HRV_HF",     "HRV_LFHF",   "HRV_LFn",   "HRV_HFn"};
  return kNames;
}

HrvFeatureVector hrv_all(const IbiSeries& ibi) {
  HrvFeatureVector out;
  const auto poincare = hrv_poincare(ibi);
  const auto time = hrv_time(ibi);
  const auto freq = hrv_freq(ibi);
  auto it = std::copy(poincare.begin(), poincare.end(), out.values.begin());
  it = std::copy(time.begin(), time.end(), it);
  std::copy(freq.begin(), freq.end(), it);
  return out;
}

double mean_hr(const IbiSeries& ibi) {
  require_intervals(ibi, 1);
  return 60000.0 / mean_of(ibi.intervals_ms);
}

}  // namespace engage::hrv
