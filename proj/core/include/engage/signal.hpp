#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace engage::signal {

// Uniformly sampled real time series.
struct SampledSignal {
  std::vector<double> values;
  double fs = 1.0;  // Hz, > 0
  double t0 = 0.0;  // seconds

  double duration() const { return static_cast<double>(values.size()) / fs; }
  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) / fs; }
};

struct Band {
  double low = 0.0;   // Hz
  double high = 0.0;  // Hz
};

// 40-180 bpm.
inline constexpr Band kHeartRateBand{0.66, 3.0};

struct PsdVector {
  std::vector<double> power;  // non-negative, one entry per frequency bin
  std::vector<double> freqs;  // Hz, strictly increasing
  Band band;
};

// Frequency-domain mask filter: removes the mean, zeroes every DFT bin
// outside [low, high] and tapers the inner edges with a raised cosine of
// width 0.1 * low. Output keeps the input's length, fs and t0.
SampledSignal bandpass(const SampledSignal& signal, Band band);

// Hann-windowed single periodogram restricted to the bins inside `band`.
// The input is mean-removed and zero padded to padded_length(n). When
// `normalize` is set the power sums to one.
PsdVector periodogram_psd(const SampledSignal& signal, Band band, bool normalize);

// Frequency of the largest bin; exact ties go to the lowest frequency.
double dominant_frequency(const PsdVector& psd);
double hr_from_psd(const PsdVector& psd);

// --- Spectral building blocks shared by the HRV and contrastive modules. ---

// Next power of two >= 4 * n.
std::size_t padded_length(std::size_t n);

// Symmetric Hann window, w[m] = 0.5 - 0.5 cos(2 pi m / (n - 1)).
std::vector<double> hann_window(std::size_t n);

// Non-negative-frequency half of the DFT of `x` zero padded to `padded`
// samples: padded / 2 + 1 bins.
std::vector<std::complex<double>> real_dft(std::span<const double> x, std::size_t padded);

// Real sequence of length `padded` whose DFT is the Hermitian extension of
// `half_spectrum` (padded / 2 + 1 bins). Unnormalized: no 1/padded factor.
std::vector<double> hermitian_synthesis(std::span<const std::complex<double>> half_spectrum,
                                        std::size_t padded);

// Inclusive bin range [first, last] whose frequencies k * fs / padded fall
// inside the closed band. first > last when the band holds no bin.
struct BinRange {
  std::size_t first = 1;
  std::size_t last = 0;
  std::size_t size() const { return last >= first ? last - first + 1 : 0; }
};
BinRange band_bins(std::size_t padded, double fs, Band band);

// Values with the mean subtracted. A signal whose centred samples are all
// within rounding noise of zero is returned as exact zeros.
std::vector<double> centered(std::span<const double> values);

// Signal CSV: header `time_s,value`. fs is the reciprocal of the median
// timestamp delta; files whose deltas stray more than 1% from it are rejected.
SampledSignal read_signal_csv(const std::filesystem::path& path);
void write_signal_csv(const std::filesystem::path& path, const SampledSignal& signal);

}  // namespace engage::signal
