#include "engage/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "engage/csv.hpp"
#include "engage/error.hpp"

namespace engage::signal {

namespace {

// The FFTW planner is not re-entrant; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

class Plan {
 public:
  explicit Plan(fftw_plan plan) : plan_(plan) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

void check_band(double fs, Band band) {
  if (!(fs > 0.0) || !(band.low > 0.0) || !(band.high > band.low) || !(band.high < fs / 2.0)) {
    throw Error(ErrorCode::kInvalidBand, "band [" + std::to_string(band.low) + ", " +
                                             std::to_string(band.high) +
                                             "] Hz must satisfy 0 < low < high < fs/2 (fs = " +
                                             std::to_string(fs) + ")");
  }
}

double mask_gain(double f, Band band) {
  if (f < band.low || f > band.high) return 0.0;
  const double taper = 0.1 * band.low;
  double gain = 1.0;
  if (f < band.low + taper) {
    gain = std::min(gain, 0.5 * (1.0 - std::cos(std::numbers::pi * (f - band.low) / taper)));
  }
  if (f > band.high - taper) {
    gain = std::min(gain, 0.5 * (1.0 - std::cos(std::numbers::pi * (band.high - f) / taper)));
  }
  return gain;
}

}  // namespace

std::size_t padded_length(std::size_t n) {
  std::size_t padded = 1;
  while (padded < 4 * n) padded <<= 1;
  return padded;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t m = 0; m < n; ++m) {
    w[m] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / denom);
  }
  return w;
}

std::vector<double> centered(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double scale = 0.0;
  double spread = 0.0;
  for (double& v : out) {
    scale = std::max(scale, std::abs(v));
    v -= mean;
    spread = std::max(spread, std::abs(v));
  }
  if (spread <= 1e-12 * std::max(1.0, scale)) std::fill(out.begin(), out.end(), 0.0);
  return out;
}

std::vector<std::complex<double>> real_dft(std::span<const double> x, std::size_t padded) {
  if (padded < x.size() || padded == 0) {
    throw Error(ErrorCode::kInvalidArgument, "DFT length shorter than input");
  }
  const std::size_t bins = padded / 2 + 1;
  RealBuffer in(fftw_alloc_real(padded));
  ComplexBuffer out(fftw_alloc_complex(bins));
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(static_cast<int>(padded), in.get(),
                                                       out.get(), FFTW_ESTIMATE));
  }
  std::copy(x.begin(), x.end(), in.get());
  std::fill(in.get() + x.size(), in.get() + padded, 0.0);
  plan->execute();
  std::vector<std::complex<double>> result(bins);
  for (std::size_t k = 0; k < bins; ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

std::vector<double> hermitian_synthesis(std::span<const std::complex<double>> half_spectrum,
                                        std::size_t padded) {
  const std::size_t bins = padded / 2 + 1;
  if (padded == 0 || half_spectrum.size() != bins) {
    throw Error(ErrorCode::kShape, "half spectrum must hold padded / 2 + 1 bins");
  }
  ComplexBuffer in(fftw_alloc_complex(bins));
  RealBuffer out(fftw_alloc_real(padded));
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(padded), in.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < bins; ++k) {
    in[k][0] = half_spectrum[k].real();
    in[k][1] = half_spectrum[k].imag();
  }
  plan->execute();
  return std::vector<double>(out.get(), out.get() + padded);
}

BinRange band_bins(std::size_t padded, double fs, Band band) {
  const double resolution = fs / static_cast<double>(padded);
  const double lo = std::ceil(band.low / resolution - 1e-9);
  const double hi = std::floor(band.high / resolution + 1e-9);
  BinRange range;
  range.first = static_cast<std::size_t>(std::max(0.0, lo));
  range.last = static_cast<std::size_t>(std::min(static_cast<double>(padded / 2), hi));
  if (hi < lo) range = BinRange{};
  return range;
}

SampledSignal bandpass(const SampledSignal& signal, Band band) {
  check_band(signal.fs, band);
  const std::size_t n = signal.values.size();
  if (n < 8) {
    throw Error(ErrorCode::kTooShort, "bandpass needs at least 8 samples, got " + std::to_string(n));
  }
  const std::size_t bins = n / 2 + 1;
  RealBuffer time(fftw_alloc_real(n));
  ComplexBuffer freq(fftw_alloc_complex(bins));
  std::unique_ptr<Plan> forward;
  std::unique_ptr<Plan> inverse;
  {
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    forward = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(len, time.get(), freq.get(), FFTW_ESTIMATE));
    inverse = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(len, freq.get(), time.get(), FFTW_ESTIMATE));
  }
  const auto values = centered(signal.values);
  std::copy(values.begin(), values.end(), time.get());
  forward->execute();
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * signal.fs / static_cast<double>(n);
    const double gain = mask_gain(f, band);
    freq[k][0] *= gain;
    freq[k][1] *= gain;
  }
  inverse->execute();

  SampledSignal out{std::vector<double>(n), signal.fs, signal.t0};
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = time[i] * scale;
  return out;
}

PsdVector periodogram_psd(const SampledSignal& signal, Band band, bool normalize) {
  if (!(signal.fs > 0.0) || !(band.low > 0.0) || !(band.high > band.low) ||
      band.high > signal.fs / 2.0) {
    throw Error(ErrorCode::kInvalidBand, "PSD band outside (0, fs/2]");
  }
  if (signal.values.empty() || signal.duration() < 4.0 / band.low - 1e-9) {
    throw Error(ErrorCode::kTooShort, "PSD needs at least 4 cycles of the lowest band frequency (" +
                                          std::to_string(4.0 / band.low) + " s), got " +
                                          std::to_string(signal.duration()) + " s");
  }
  const std::size_t n = signal.values.size();
  auto x = centered(signal.values);
  const auto window = hann_window(n);
  for (std::size_t m = 0; m < n; ++m) x[m] *= window[m];

  const std::size_t padded = padded_length(n);
  const auto spectrum = real_dft(x, padded);
  const auto bins = band_bins(padded, signal.fs, band);

  PsdVector psd;
  psd.band = band;
  psd.power.reserve(bins.size());
  psd.freqs.reserve(bins.size());
  for (std::size_t k = bins.first; k <= bins.last && bins.size() > 0; ++k) {
    psd.power.push_back(std::norm(spectrum[k]));
    psd.freqs.push_back(static_cast<double>(k) * signal.fs / static_cast<double>(padded));
  }
  if (normalize) {
    const double total = std::accumulate(psd.power.begin(), psd.power.end(), 0.0);
    if (!(total > 0.0)) throw Error(ErrorCode::kFlatSignal, "no in-band power to normalize");
    for (double& p : psd.power) p /= total;
  }
  return psd;
}

double dominant_frequency(const PsdVector& psd) {
  if (psd.power.empty() || psd.power.size() != psd.freqs.size()) {
    throw Error(ErrorCode::kEmptyInput, "dominant frequency of an empty PSD");
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < psd.power.size(); ++k) {
    if (psd.power[k] > psd.power[best]) best = k;
  }
  return psd.freqs[best];
}

double hr_from_psd(const PsdVector& psd) { return 60.0 * dominant_frequency(psd); }

SampledSignal read_signal_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto time_col = table.require("time_s");
  const auto value_col = table.require("value");
  if (table.rows.size() < 2) {
    throw Error(ErrorCode::kTooShort, path.string() + ": signal needs at least two samples");
  }
  std::vector<double> times;
  SampledSignal out;
  times.reserve(table.rows.size());
  out.values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    times.push_back(csv::parse_double(table.rows[r][time_col], r + 1, "time_s"));
    out.values.push_back(csv::parse_double(table.rows[r][value_col], r + 1, "value"));
  }
  std::vector<double> deltas(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) deltas[i - 1] = times[i] - times[i - 1];
  auto sorted = deltas;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + sorted.size() / 2);
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) throw Error(ErrorCode::kParse, path.string() + ": timestamps not increasing");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (std::abs(deltas[i] - median) > 0.01 * median) {
      throw Error(ErrorCode::kParse, path.string() + ": irregular sampling at row " +
                                         std::to_string(i + 2) + " (delta " +
                                         std::to_string(deltas[i]) + " s vs median " +
                                         std::to_string(median) + " s)");
    }
  }
  out.fs = 1.0 / median;
  out.t0 = times.front();
  return out;
}

void write_signal_csv(const std::filesystem::path& path, const SampledSignal& signal) {
  std::string text = "time_s,value\n";
  text.reserve(signal.values.size() * 24);
  for (std::size_t i = 0; i < signal.values.size(); ++i) {
    text += csv::format_double(signal.time_at(i), 10);
    text.push_back(',');
    text += csv::format_double(signal.values[i], 8);
    text.push_back('\n');
  }
  csv::write_text_file(path, text);
}

}  // namespace engage::signal
