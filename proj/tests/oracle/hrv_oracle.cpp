#include "hrv_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace oracle {

namespace {

using ld = long double;

const ld kPi = 3.141592653589793238462643383279502884L;
const ld kBinMs = 1000.0L / 128.0L;

ld mean(const std::vector<double>& x) {
  ld s = 0;
  for (double v : x) s += v;
  return s / static_cast<ld>(x.size());
}

ld sample_sd(const std::vector<double>& x) {
  const ld m = mean(x);
  ld s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<ld>(x.size() - 1));
}

std::vector<double> diffs(const std::vector<double>& x) {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d.push_back(x[i + 1] - x[i]);
  return d;
}

ld median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n % 2 == 1) return x[n / 2];
  return (static_cast<ld>(x[n / 2 - 1]) + x[n / 2]) / 2;
}

// Quantile with linear interpolation between closest ranks.
ld quantile(std::vector<double> x, ld q) {
  std::sort(x.begin(), x.end());
  const ld h = (static_cast<ld>(x.size()) - 1) * q;
  const ld lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= x.size()) return x.back();
  return x[i] + (h - lo) * (static_cast<ld>(x[i + 1]) - x[i]);
}

std::vector<int> histogram(const std::vector<double>& nn) {
  const double lo = *std::min_element(nn.begin(), nn.end());
  const double hi = *std::max_element(nn.begin(), nn.end());
  const int bins = static_cast<int>(std::floor((hi - lo) / static_cast<double>(kBinMs))) + 1;
  std::vector<int> h(static_cast<std::size_t>(bins), 0);
  for (double v : nn) {
    int b = static_cast<int>(std::floor((v - lo) / static_cast<double>(kBinMs)));
    if (b >= bins) b = bins - 1;
    ++h[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace

std::array<double, 3> poincare(const std::vector<double>& nn) {
  const ld sdnn = sample_sd(nn);
  const ld sdsd = sample_sd(diffs(nn));
  const ld sd1 = sdsd / std::sqrt(2.0L);
  const ld sd2sq = 2 * sdnn * sdnn - sd1 * sd1;
  const ld sd2 = sd2sq > 0 ? std::sqrt(sd2sq) : 0;
  return {static_cast<double>(sd1), static_cast<double>(sd2), sd2 == 0 ? 0.0 : static_cast<double>(sd1 / sd2)};
}

double tinn(const std::vector<double>& nn) {
  const auto h = histogram(nn);
  const int bins = static_cast<int>(h.size());
  int occupied = 0;
  for (int c : h) occupied += c > 0;
  if (occupied <= 1) return 0.0;
  int x = 0;
  for (int b = 1; b < bins; ++b) {
    if (h[static_cast<std::size_t>(b)] > h[static_cast<std::size_t>(x)]) x = b;
  }
  const ld y = h[static_cast<std::size_t>(x)];
  // Triangle through (n, 0), (x, y), (m, 0), zero outside [n, m].
  ld best = 0;
  int width = -1;
  for (int n = -1; n < x; ++n) {
    for (int m = x + 1; m <= bins; ++m) {
      ld err = 0;
      for (int b = 0; b < bins; ++b) {
        ld q = 0;
        if (b > n && b <= x) q = y * (b - n) / static_cast<ld>(x - n);
        if (b > x && b < m) q = y * (m - b) / static_cast<ld>(m - x);
        const ld r = h[static_cast<std::size_t>(b)] - q;
        err += r * r;
      }
      const ld tol = 1e-12L * (1 + best);
      if (width < 0 || err < best - tol || (std::fabs(err - best) <= tol && m - n < width)) {
        best = err;
        width = m - n;
      }
    }
  }
  return static_cast<double>(width * kBinMs);
}

std::array<double, 16> time_domain(const std::vector<double>& nn) {
  const auto d = diffs(nn);
  const ld mean_nn = mean(nn);
  const ld sdnn = sample_sd(nn);
  ld sq = 0;
  for (double v : d) sq += static_cast<ld>(v) * v;
  const ld rmssd = std::sqrt(sq / static_cast<ld>(d.size()));
  const ld sdsd = sample_sd(d);
  const ld med = median(nn);
  std::vector<double> dev;
  for (double v : nn) dev.push_back(static_cast<double>(std::fabs(v - med)));
  const ld mad = 1.4826L * median(dev);
  const ld iqr = quantile(nn, 0.75L) - quantile(nn, 0.25L);
  int over50 = 0;
  int over20 = 0;
  for (double v : d) {
    over50 += std::fabs(v) > 50.0;
    over20 += std::fabs(v) > 20.0;
  }
  const auto h = histogram(nn);
  const int peak = *std::max_element(h.begin(), h.end());
  return {static_cast<double>(mean_nn),
          static_cast<double>(sdnn),
          static_cast<double>(rmssd),
          static_cast<double>(sdsd),
          static_cast<double>(sdnn / mean_nn),
          static_cast<double>(rmssd / mean_nn),
          static_cast<double>(med),
          static_cast<double>(mad),
          static_cast<double>(mad / med),
          static_cast<double>(iqr),
          100.0 * over50 / static_cast<double>(d.size()),
          100.0 * over20 / static_cast<double>(d.size()),
          *std::min_element(nn.begin(), nn.end()),
          *std::max_element(nn.begin(), nn.end()),
          static_cast<double>(nn.size()) / peak,
          tinn(nn)};
}

std::array<double, 5> frequency_domain(const std::vector<double>& nn, const std::vector<double>& onset) {
  const ld fs = 4;
  // Resample interval-vs-onset at 4 Hz from the first onset to the last.
  std::vector<ld> x;
  for (int g = 0;; ++g) {
    const ld t = onset.front() + g / fs;
    if (t > onset.back() + 1e-12L) break;
    std::size_t s = 0;
    while (s + 2 < onset.size() && onset[s + 1] < t) ++s;
    ld frac = (t - onset[s]) / (static_cast<ld>(onset[s + 1]) - onset[s]);
    frac = std::clamp(frac, ld{0}, ld{1});
    x.push_back(nn[s] + frac * (static_cast<ld>(nn[s + 1]) - nn[s]));
  }
  const std::size_t n = x.size();
  ld m = 0;
  for (ld v : x) m += v;
  m /= static_cast<ld>(n);
  ld energy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ld w = 0.5L - 0.5L * std::cos(2 * kPi * static_cast<ld>(i) / static_cast<ld>(n - 1));
    x[i] = (x[i] - m) * w;
    energy += w * w;
  }
  std::size_t p = 1;
  while (p < 4 * n) p *= 2;
  const ld df = fs / static_cast<ld>(p);

  auto density = [&](std::size_t k) {
    ld re = 0;
    ld im = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const ld a = 2 * kPi * static_cast<ld>((k * i) % p) / static_cast<ld>(p);
      re += x[i] * std::cos(a);
      im -= x[i] * std::sin(a);
    }
    return 2 * (re * re + im * im) / (fs * energy);
  };
  auto band = [&](ld lo, ld hi) {
    ld area = 0;
    bool first = true;
    ld prev = 0;
    for (std::size_t k = 1; static_cast<ld>(k) * df < hi; ++k) {
      if (static_cast<ld>(k) * df < lo) continue;
      const ld d = density(k);
      if (!first) area += (prev + d) / 2 * df;
      prev = d;
      first = false;
    }
    return area;
  };
  const ld lf = band(0.04L, 0.15L);
  const ld hf = band(0.15L, 0.40L);
  return {static_cast<double>(lf), static_cast<double>(hf), static_cast<double>(lf / hf),
          static_cast<double>(lf / (lf + hf)), static_cast<double>(hf / (lf + hf))};
}

std::array<double, 24> hrv_features(const std::vector<double>& nn, const std::vector<double>& onset) {
  std::array<double, 24> out{};
  const auto a = poincare(nn);
  const auto b = time_domain(nn);
  const auto c = frequency_domain(nn, onset);
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + 3);
  std::copy(c.begin(), c.end(), out.begin() + 19);
  return out;
}

}  // namespace oracle
