#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "engage/rng.hpp"
#include "engage/signal.hpp"

namespace engage::contrastive {

using signal::PsdVector;
using signal::SampledSignal;

// Spatiotemporal pulse volume indexed (t, h, w).
class STBlock {
 public:
  STBlock(std::size_t frames, std::size_t height, std::size_t width, double fs);
  STBlock(std::size_t frames, std::size_t height, std::size_t width, double fs,
          std::vector<double> values);

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double fs() const { return fs_; }
  double duration() const { return static_cast<double>(frames_) / fs_; }

  double& at(std::size_t t, std::size_t h, std::size_t w) { return values_[index(t, h, w)]; }
  double at(std::size_t t, std::size_t h, std::size_t w) const { return values_[index(t, h, w)]; }
  std::span<const double> values() const { return values_; }

  // block[t_begin : t_begin + length, h, w] as a signal starting at t_begin / fs.
  SampledSignal trace(std::size_t h, std::size_t w, std::size_t t_begin, std::size_t length) const;
  // Average over all spatial locations, full duration.
  SampledSignal spatial_mean() const;

 private:
  std::size_t index(std::size_t t, std::size_t h, std::size_t w) const {
    return (t * height_ + h) * width_ + w;
  }

  std::size_t frames_;
  std::size_t height_;
  std::size_t width_;
  double fs_;
  std::vector<double> values_;
};

// Multi-channel video volume indexed (c, t, h, w).
class VideoBlock {
 public:
  VideoBlock(std::size_t channels, std::size_t frames, std::size_t height, std::size_t width,
             double fs);

  std::size_t channels() const { return channels_; }
  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double fs() const { return fs_; }

  double& at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return values_[index(c, t, h, w)];
  }
  double at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return values_[index(c, t, h, w)];
  }
  // One channel as a single-channel block.
  STBlock channel(std::size_t c) const;

 private:
  std::size_t index(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return ((c * frames_ + t) * height_ + h) * width_ + w;
  }

  std::size_t channels_;
  std::size_t frames_;
  std::size_t height_;
  std::size_t width_;
  double fs_;
  std::vector<double> values_;
};

struct SamplingSpec {
  std::size_t n_samples = 4;
  double delta_t = 10.0;  // seconds
  std::uint64_t seed = 0;
};

// Spectral settings shared by every sample in a batch.
struct PsdConfig {
  signal::Band band = signal::kHeartRateBand;
};

struct SampleLocation {
  std::size_t t_begin = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

// Window length in samples for a spec at a given rate.
std::size_t window_samples(const SamplingSpec& spec, double fs);

// Draws spec.n_samples uniform (t, h, w) locations: t on the sample grid
// over [0, frames - window], h and w over the spatial indices.
std::vector<SampleLocation> draw_locations(std::size_t frames, std::size_t height,
                                           std::size_t width, double fs,
                                           const SamplingSpec& spec, Rng& rng);

// Spatiotemporal sampling, seeded from spec.seed.
std::vector<SampledSignal> sample_st(const STBlock& block, const SamplingSpec& spec);
std::vector<SampledSignal> sample_at(const STBlock& block, std::span<const SampleLocation> where,
                                     std::size_t length);

// Mean squared distance over ordered within-block pairs, both blocks:
// sum_i sum_{j != i} (|f_i - f_j|^2 + |f'_i - f'_j|^2) / (2 N (N - 1)).
double positive_loss(std::span<const PsdVector> psds, std::span<const PsdVector> psds_prime);

// Negated mean squared distance over all cross-block pairs:
// -sum_i sum_j |f_i - f'_j|^2 / N^2.
double negative_loss(std::span<const PsdVector> psds, std::span<const PsdVector> psds_prime);

struct LossGradient {
  double loss = 0.0;
  double positive = 0.0;
  double negative = 0.0;
  // d loss / d sample value, one vector per input sample.
  std::vector<std::vector<double>> grad;
  std::vector<std::vector<double>> grad_prime;
};

// Which loss terms enter the returned loss and gradient.
enum class LossTerms { kBoth, kPositiveOnly, kNegativeOnly };

// L = L_p + L_n over unit-normalized PSDs, with the exact gradient chained
// back through normalization, squared magnitude, DFT, window and mean removal.
LossGradient total_loss_with_gradient(std::span<const SampledSignal> samples,
                                      std::span<const SampledSignal> samples_prime,
                                      const PsdConfig& config = {},
                                      LossTerms terms = LossTerms::kBoth);

// Linear channel mixer standing in for a learned pulse extractor:
// p(t, h, w) = sum_c w_c v(c, t, h, w), minus its temporal mean per location.
struct ToyExtractor {
  std::vector<double> channel_weights;

  STBlock apply(const VideoBlock& video) const;
};

using VideoPair = std::pair<VideoBlock, VideoBlock>;

struct TrainOptions {
  std::size_t steps = 200;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  // Defaults to seeded standard-normal weights.
  std::optional<std::vector<double>> initial_weights;
  PsdConfig psd;
};

struct TrainResult {
  ToyExtractor extractor;
  std::vector<double> loss_history;  // mean loss over pairs, one per step
};

// Plain gradient descent on the contrastive loss. Each step redraws sample
// locations in both videos of every pair from a stream derived from
// (seed, step, pair).
TrainResult train_toy_extractor(std::span<const VideoPair> pairs, const SamplingSpec& spec,
                                const TrainOptions& options);

// Mean loss over pairs with locations drawn from spec.seed; used to compare
// extractors on identical samples.
double evaluate_loss(const ToyExtractor& extractor, std::span<const VideoPair> pairs,
                     const SamplingSpec& spec, const PsdConfig& config = {});

struct GradCheckOptions {
  std::size_t trials = 20;
  std::size_t n_samples = 4;
  std::size_t window = 128;
  double fs = 20.0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t trials = 0;
  std::size_t entries = 0;
};

// Central-difference check of total_loss_with_gradient on random signals.
// Per entry: |analytic - numeric| / max(|analytic|, |numeric|, 1e-3 * max |analytic|).
GradCheckReport gradient_check(const GradCheckOptions& options);

}  // namespace engage::contrastive
