#include "engage/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "engage/error.hpp"

namespace engage::contrastive {

namespace {

void require_same_lengths(std::span<const PsdVector> a, std::span<const PsdVector> b) {
  const std::size_t len = a.empty() ? (b.empty() ? 0 : b.front().power.size())
                                    : a.front().power.size();
  auto check = [len](std::span<const PsdVector> list) {
    for (const auto& psd : list) {
      if (psd.power.size() != len) {
        throw Error(ErrorCode::kShape, "PSD lengths differ (" + std::to_string(psd.power.size()) +
                                           " vs " + std::to_string(len) + ")");
      }
    }
  };
  check(a);
  check(b);
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return sum;
}

// Everything the backward pass needs about one sample's normalized PSD.
struct SpectralTape {
  std::size_t n = 0;
  std::size_t padded = 0;
  signal::BinRange bins;
  std::vector<double> window;
  std::vector<std::complex<double>> spectrum;  // band bins only
  double total = 0.0;
  PsdVector psd;  // normalized
};

SpectralTape forward(const SampledSignal& sample, const PsdConfig& config) {
  const auto band = config.band;
  if (!(sample.fs > 0.0) || !(band.low > 0.0) || !(band.high > band.low) ||
      band.high > sample.fs / 2.0) {
    throw Error(ErrorCode::kInvalidBand, "PSD band outside (0, fs/2]");
  }
  if (sample.values.empty() || sample.duration() < 4.0 / band.low - 1e-9) {
    throw Error(ErrorCode::kTooShort, "sample shorter than four cycles of the band's low edge");
  }
  SpectralTape tape;
  tape.n = sample.values.size();
  tape.padded = signal::padded_length(tape.n);
  tape.window = signal::hann_window(tape.n);
  auto x = signal::centered(sample.values);
  for (std::size_t m = 0; m < tape.n; ++m) x[m] *= tape.window[m];
  const auto full = signal::real_dft(x, tape.padded);
  tape.bins = signal::band_bins(tape.padded, sample.fs, band);
  tape.psd.band = band;
  for (std::size_t k = tape.bins.first; k <= tape.bins.last && tape.bins.size() > 0; ++k) {
    tape.spectrum.push_back(full[k]);
    tape.psd.power.push_back(std::norm(full[k]));
    tape.psd.freqs.push_back(static_cast<double>(k) * sample.fs / static_cast<double>(tape.padded));
  }
  tape.total = std::accumulate(tape.psd.power.begin(), tape.psd.power.end(), 0.0);
  if (!(tape.total > 0.0)) throw Error(ErrorCode::kFlatSignal, "sample has no in-band power");
  for (double& p : tape.psd.power) p /= tape.total;
  return tape;
}

// Pulls d loss / d f (normalized PSD) back to d loss / d raw sample value.
std::vector<double> backward(const SpectralTape& tape, const std::vector<double>& grad_psd) {
  const auto& f = tape.psd.power;
  const double projection = std::inner_product(grad_psd.begin(), grad_psd.end(), f.begin(), 0.0);

  // d loss / d P_k, then scaled by the DFT coefficient: d P_k / d y_m is
  // 2 Re(X_k e^{+i 2 pi k m / M}), which a Hermitian synthesis evaluates for
  // every m at once.
  std::vector<std::complex<double>> half(tape.padded / 2 + 1);
  for (std::size_t j = 0; j < f.size(); ++j) {
    const std::size_t k = tape.bins.first + j;
    const double grad_power = (grad_psd[j] - projection) / tape.total;
    double weight = grad_power;
    // DC and Nyquist bins appear once in the Hermitian extension.
    if (k == 0 || 2 * k == tape.padded) weight *= 2.0;
    half[k] = weight * tape.spectrum[j];
  }
  const auto synth = signal::hermitian_synthesis(half, tape.padded);

  std::vector<double> grad(tape.n);
  double mean = 0.0;
  for (std::size_t m = 0; m < tape.n; ++m) {
    grad[m] = synth[m] * tape.window[m];
    mean += grad[m];
  }
  mean /= static_cast<double>(tape.n);
  for (double& g : grad) g -= mean;
  return grad;
}

std::vector<double> sum_of(std::span<const SpectralTape> tapes) {
  std::vector<double> sum(tapes.front().psd.power.size(), 0.0);
  for (const auto& t : tapes) {
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += t.psd.power[k];
  }
  return sum;
}

void validate_pair_lists(std::size_t n, std::size_t n_prime) {
  if (n != n_prime) {
    throw Error(ErrorCode::kShape, "sample lists differ in size (" + std::to_string(n) + " vs " +
                                       std::to_string(n_prime) + ")");
  }
  if (n < 2) {
    throw Error(ErrorCode::kDegeneratePairs, "need at least two samples per block, got " +
                                                 std::to_string(n));
  }
}

}  // namespace

STBlock::STBlock(std::size_t frames, std::size_t height, std::size_t width, double fs)
    : STBlock(frames, height, width, fs, std::vector<double>(frames * height * width, 0.0)) {}

STBlock::STBlock(std::size_t frames, std::size_t height, std::size_t width, double fs,
                 std::vector<double> values)
    : frames_(frames), height_(height), width_(width), fs_(fs), values_(std::move(values)) {
  if (frames < 2 || height < 1 || width < 1 || !(fs > 0.0)) {
    throw Error(ErrorCode::kShape, "ST block needs T >= 2, H >= 1, W >= 1 and fs > 0");
  }
  if (values_.size() != frames * height * width) {
    throw Error(ErrorCode::kShape, "ST block value count does not match T * H * W");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "ST block holds non-finite values");
  }
}

SampledSignal STBlock::trace(std::size_t h, std::size_t w, std::size_t t_begin,
                             std::size_t length) const {
  if (h >= height_ || w >= width_ || t_begin + length > frames_) {
    throw Error(ErrorCode::kInvalidWindow, "trace outside the ST block");
  }
  SampledSignal out{std::vector<double>(length), fs_, static_cast<double>(t_begin) / fs_};
  for (std::size_t t = 0; t < length; ++t) out.values[t] = at(t_begin + t, h, w);
  return out;
}

SampledSignal STBlock::spatial_mean() const {
  SampledSignal out{std::vector<double>(frames_, 0.0), fs_, 0.0};
  const double scale = 1.0 / static_cast<double>(height_ * width_);
  for (std::size_t t = 0; t < frames_; ++t) {
    double sum = 0.0;
    for (std::size_t h = 0; h < height_; ++h) {
      for (std::size_t w = 0; w < width_; ++w) sum += at(t, h, w);
    }
    out.values[t] = sum * scale;
  }
  return out;
}

VideoBlock::VideoBlock(std::size_t channels, std::size_t frames, std::size_t height,
                       std::size_t width, double fs)
    : channels_(channels),
      frames_(frames),
      height_(height),
      width_(width),
      fs_(fs),
      values_(channels * frames * height * width, 0.0) {
  if (channels < 1 || frames < 2 || height < 1 || width < 1 || !(fs > 0.0)) {
    throw Error(ErrorCode::kShape, "video needs C >= 1, T >= 2, H >= 1, W >= 1 and fs > 0");
  }
}

STBlock VideoBlock::channel(std::size_t c) const {
  if (c >= channels_) throw Error(ErrorCode::kShape, "channel index out of range");
  const std::size_t plane = frames_ * height_ * width_;
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(c * plane);
  return STBlock(frames_, height_, width_, fs_,
                 std::vector<double>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

std::size_t window_samples(const SamplingSpec& spec, double fs) {
  return static_cast<std::size_t>(std::llround(spec.delta_t * fs));
}

std::vector<SampleLocation> draw_locations(std::size_t frames, std::size_t height,
                                           std::size_t width, double fs,
                                           const SamplingSpec& spec, Rng& rng) {
  if (spec.n_samples < 1) throw Error(ErrorCode::kInvalidCount, "need at least one sample");
  const double duration = static_cast<double>(frames) / fs;
  if (!(spec.delta_t > 0.0) || spec.delta_t > duration + 1e-9) {
    throw Error(ErrorCode::kInvalidWindow, "window of " + std::to_string(spec.delta_t) +
                                               " s does not fit a block of " +
                                               std::to_string(duration) + " s");
  }
  const std::size_t length = std::min(window_samples(spec, fs), frames);
  if (length < 8) {
    throw Error(ErrorCode::kInvalidWindow, "window covers fewer than 8 samples");
  }
  std::vector<SampleLocation> out(spec.n_samples);
  for (auto& loc : out) {
    loc.t_begin = rng.uniform_index(frames - length + 1);
    loc.h = rng.uniform_index(height);
    loc.w = rng.uniform_index(width);
  }
  return out;
}

std::vector<SampledSignal> sample_at(const STBlock& block, std::span<const SampleLocation> where,
                                     std::size_t length) {
  std::vector<SampledSignal> out;
  out.reserve(where.size());
  for (const auto& loc : where) out.push_back(block.trace(loc.h, loc.w, loc.t_begin, length));
  return out;
}

std::vector<SampledSignal> sample_st(const STBlock& block, const SamplingSpec& spec) {
  Rng rng(spec.seed);
  const auto where = draw_locations(block.frames(), block.height(), block.width(), block.fs(), spec, rng);
  const std::size_t length = std::min(window_samples(spec, block.fs()), block.frames());
  return sample_at(block, where, length);
}

double positive_loss(std::span<const PsdVector> psds, std::span<const PsdVector> psds_prime) {
  validate_pair_lists(psds.size(), psds_prime.size());
  require_same_lengths(psds, psds_prime);
  const std::size_t n = psds.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum += squared_distance(psds[i].power, psds[j].power) +
             squared_distance(psds_prime[i].power, psds_prime[j].power);
    }
  }
  return sum / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double negative_loss(std::span<const PsdVector> psds, std::span<const PsdVector> psds_prime) {
  if (psds.empty() || psds_prime.empty()) {
    throw Error(ErrorCode::kEmptyInput, "negative loss needs samples from both blocks");
  }
  if (psds.size() != psds_prime.size()) {
    throw Error(ErrorCode::kShape, "sample lists differ in size");
  }
  require_same_lengths(psds, psds_prime);
  const std::size_t n = psds.size();
  double sum = 0.0;
  for (const auto& a : psds) {
    for (const auto& b : psds_prime) sum += squared_distance(a.power, b.power);
  }
  return -sum / (static_cast<double>(n) * static_cast<double>(n));
}

LossGradient total_loss_with_gradient(std::span<const SampledSignal> samples,
                                      std::span<const SampledSignal> samples_prime,
                                      const PsdConfig& config, LossTerms terms) {
  validate_pair_lists(samples.size(), samples_prime.size());
  const std::size_t n = samples.size();

  std::vector<SpectralTape> tapes;
  std::vector<SpectralTape> tapes_prime;
  std::vector<PsdVector> psds;
  std::vector<PsdVector> psds_prime;
  for (std::size_t i = 0; i < n; ++i) {
    tapes.push_back(forward(samples[i], config));
    tapes_prime.push_back(forward(samples_prime[i], config));
    psds.push_back(tapes.back().psd);
    psds_prime.push_back(tapes_prime.back().psd);
  }

  LossGradient out;
  out.positive = positive_loss(psds, psds_prime);
  out.negative = negative_loss(psds, psds_prime);
  const bool use_pos = terms != LossTerms::kNegativeOnly;
  const bool use_neg = terms != LossTerms::kPositiveOnly;
  out.loss = (use_pos ? out.positive : 0.0) + (use_neg ? out.negative : 0.0);

  const auto sum_f = sum_of(tapes);
  const auto sum_f_prime = sum_of(tapes_prime);
  const double nd = static_cast<double>(n);
  const double pos_scale = 2.0 / (nd * (nd - 1.0));
  const double neg_scale = -2.0 / (nd * nd);
  const std::size_t bins = sum_f.size();

  auto grad_for = [&](const SpectralTape& tape, const std::vector<double>& same_sum,
                      const std::vector<double>& other_sum) {
    std::vector<double> grad_psd(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = tape.psd.power[k];
      if (use_pos) grad_psd[k] += pos_scale * (nd * f - same_sum[k]);
      if (use_neg) grad_psd[k] += neg_scale * (nd * f - other_sum[k]);
    }
    return backward(tape, grad_psd);
  };
  for (std::size_t i = 0; i < n; ++i) {
    out.grad.push_back(grad_for(tapes[i], sum_f, sum_f_prime));
    out.grad_prime.push_back(grad_for(tapes_prime[i], sum_f_prime, sum_f));
  }
  return out;
}

STBlock ToyExtractor::apply(const VideoBlock& video) const {
  if (channel_weights.size() != video.channels()) {
    throw Error(ErrorCode::kShape, "extractor has " + std::to_string(channel_weights.size()) +
                                       " weights for a " + std::to_string(video.channels()) +
                                       "-channel video");
  }
  const std::size_t frames = video.frames();
  const std::size_t height = video.height();
  const std::size_t width = video.width();
  std::vector<double> values(frames * height * width, 0.0);
  for (std::size_t h = 0; h < height; ++h) {
    for (std::size_t w = 0; w < width; ++w) {
      double mean = 0.0;
      for (std::size_t t = 0; t < frames; ++t) {
        double v = 0.0;
        for (std::size_t c = 0; c < video.channels(); ++c) v += channel_weights[c] * video.at(c, t, h, w);
        values[(t * height + h) * width + w] = v;
        mean += v;
      }
      mean /= static_cast<double>(frames);
      for (std::size_t t = 0; t < frames; ++t) values[(t * height + h) * width + w] -= mean;
    }
  }
  return STBlock(frames, height, width, video.fs(), std::move(values));
}

namespace {

struct PairEvaluation {
  double loss = 0.0;
  std::vector<double> weight_grad;
};

PairEvaluation evaluate_pair(const ToyExtractor& extractor, const VideoPair& pair,
                             const SamplingSpec& spec, const PsdConfig& config, Rng& rng,
                             bool with_gradient) {
  const auto& [video, video_prime] = pair;
  const auto block = extractor.apply(video);
  const auto block_prime = extractor.apply(video_prime);
  const auto where = draw_locations(block.frames(), block.height(), block.width(), block.fs(), spec, rng);
  const auto where_prime = draw_locations(block_prime.frames(), block_prime.height(),
                                          block_prime.width(), block_prime.fs(), spec, rng);
  const std::size_t length = std::min(window_samples(spec, block.fs()), block.frames());
  const std::size_t length_prime = std::min(window_samples(spec, block_prime.fs()), block_prime.frames());
  const auto samples = sample_at(block, where, length);
  const auto samples_prime = sample_at(block_prime, where_prime, length_prime);
  const auto lg = total_loss_with_gradient(samples, samples_prime, config);

  PairEvaluation out;
  out.loss = lg.loss;
  if (!with_gradient) return out;
  // The per-location mean removal shifts a whole window by a constant, and
  // the sample gradients sum to zero, so it drops out of d loss / d weight.
  out.weight_grad.assign(video.channels(), 0.0);
  auto accumulate = [&](const VideoBlock& v, std::span<const SampleLocation> locs,
                        const std::vector<std::vector<double>>& grads) {
    for (std::size_t i = 0; i < locs.size(); ++i) {
      for (std::size_t c = 0; c < v.channels(); ++c) {
        double sum = 0.0;
        for (std::size_t m = 0; m < grads[i].size(); ++m) {
          sum += grads[i][m] * v.at(c, locs[i].t_begin + m, locs[i].h, locs[i].w);
        }
        out.weight_grad[c] += sum;
      }
    }
  };
  accumulate(video, where, lg.grad);
  accumulate(video_prime, where_prime, lg.grad_prime);
  return out;
}

void check_pairs(std::span<const VideoPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no video pairs");
  const std::size_t channels = pairs.front().first.channels();
  for (const auto& [a, b] : pairs) {
    if (a.channels() != channels || b.channels() != channels) {
      throw Error(ErrorCode::kShape, "videos disagree on channel count");
    }
  }
}

}  // namespace

TrainResult train_toy_extractor(std::span<const VideoPair> pairs, const SamplingSpec& spec,
                                const TrainOptions& options) {
  check_pairs(pairs);
  const std::size_t channels = pairs.front().first.channels();

  TrainResult result;
  if (options.initial_weights) {
    if (options.initial_weights->size() != channels) {
      throw Error(ErrorCode::kShape, "initial weights do not match the channel count");
    }
    result.extractor.channel_weights = *options.initial_weights;
  } else {
    Rng init(options.seed);
    result.extractor.channel_weights.resize(channels);
    for (double& w : result.extractor.channel_weights) w = init.normal();
  }

  auto& weights = result.extractor.channel_weights;
  const double pair_scale = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t step = 0; step < options.steps; ++step) {
    std::vector<double> grad(channels, 0.0);
    double loss = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      Rng rng(derive_seed(spec.seed ^ options.seed, step + 1, p));
      const auto eval = evaluate_pair(result.extractor, pairs[p], spec, options.psd, rng, true);
      loss += eval.loss * pair_scale;
      for (std::size_t c = 0; c < channels; ++c) grad[c] += eval.weight_grad[c] * pair_scale;
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kDivergence, "loss became non-finite at step " + std::to_string(step));
    }
    result.loss_history.push_back(loss);
    for (std::size_t c = 0; c < channels; ++c) weights[c] -= options.learning_rate * grad[c];
    for (double w : weights) {
      if (!std::isfinite(w)) {
        throw Error(ErrorCode::kDivergence, "weights became non-finite at step " + std::to_string(step));
      }
    }
  }
  return result;
}

double evaluate_loss(const ToyExtractor& extractor, std::span<const VideoPair> pairs,
                     const SamplingSpec& spec, const PsdConfig& config) {
  check_pairs(pairs);
  double loss = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Rng rng(derive_seed(spec.seed, 0, p));
    loss += evaluate_pair(extractor, pairs[p], spec, config, rng, false).loss;
  }
  return loss / static_cast<double>(pairs.size());
}

GradCheckReport gradient_check(const GradCheckOptions& options) {
  if (options.trials < 1) throw Error(ErrorCode::kInvalidCount, "need at least one trial");
  GradCheckReport report;
  report.trials = options.trials;
  const PsdConfig config;
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    Rng rng(derive_seed(options.seed, trial));
    auto make = [&] {
      SampledSignal s{std::vector<double>(options.window), options.fs, 0.0};
      const double f1 = rng.uniform(config.band.low, config.band.high);
      const double f2 = rng.uniform(config.band.low, config.band.high);
      const double p1 = rng.uniform(0.0, 6.283185307179586);
      for (std::size_t m = 0; m < s.values.size(); ++m) {
        const double t = static_cast<double>(m) / options.fs;
        s.values[m] = std::sin(6.283185307179586 * f1 * t + p1) + 0.5 * std::sin(6.283185307179586 * f2 * t) +
                      0.3 * rng.normal();
      }
      return s;
    };
    std::vector<SampledSignal> a;
    std::vector<SampledSignal> b;
    for (std::size_t i = 0; i < options.n_samples; ++i) {
      a.push_back(make());
      b.push_back(make());
    }
    const auto analytic = total_loss_with_gradient(a, b, config);
    double grad_max = 0.0;
    for (const auto* set : {&analytic.grad, &analytic.grad_prime}) {
      for (const auto& g : *set) {
        for (double v : g) grad_max = std::max(grad_max, std::abs(v));
      }
    }
    auto check_list = [&](std::vector<SampledSignal>& list, const std::vector<std::vector<double>>& grads) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        double rms = 0.0;
        for (double v : list[i].values) rms += v * v;
        rms = std::sqrt(rms / static_cast<double>(list[i].values.size()));
        const double step = 1e-5 * std::max(rms, 1e-12);
        for (std::size_t m = 0; m < list[i].values.size(); ++m) {
          const double saved = list[i].values[m];
          list[i].values[m] = saved + step;
          const double up = total_loss_with_gradient(a, b, config).loss;
          list[i].values[m] = saved - step;
          const double down = total_loss_with_gradient(a, b, config).loss;
          list[i].values[m] = saved;
          const double numeric = (up - down) / (2.0 * step);
          const double exact = grads[i][m];
          const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-3 * grad_max});
          const double rel = denom > 0.0 ? std::abs(exact - numeric) / denom : 0.0;
          report.max_rel_err = std::max(report.max_rel_err, rel);
          ++report.entries;
        }
      }
    };
    check_list(a, analytic.grad);
    check_list(b, analytic.grad_prime);
  }
  return report;
}

}  // namespace engage::contrastive
