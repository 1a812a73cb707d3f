#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "engage/error.hpp"
#include "engage/hrv.hpp"
#include "engage/rng.hpp"

#define EXPECT_ENGAGE_ERROR(statement, error_code)                                  \
  do {                                                                              \
    try {                                                                           \
      statement;                                                                    \
      ADD_FAILURE() << "expected " << ::engage::error_code_name(error_code);       \
    } catch (const ::engage::Error& e) {                                            \
      EXPECT_EQ(e.code(), error_code) << e.what();                                  \
    }                                                                               \
  } while (false)

namespace test_support {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("engage_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Irregular interval series long enough for the frequency features: a random
// base rate, LF/HF modulation with random amplitudes and phases, and jitter.
inline engage::hrv::IbiSeries random_ibi_series(std::uint64_t seed) {
  engage::Rng rng(seed);
  const double base = rng.uniform(650.0, 1000.0);
  const double lf = rng.uniform(0.0, 60.0);
  const double hf = rng.uniform(5.0, 60.0);
  const double p1 = rng.uniform(0.0, 6.283);
  const double p2 = rng.uniform(0.0, 6.283);
  const double jitter = rng.uniform(1.0, 30.0);
  const double duration = rng.uniform(70.0, 250.0);
  engage::hrv::IbiSeries ibi;
  double t = rng.uniform(0.0, 5.0);
  while (true) {
    const double v = base + lf * std::sin(2 * M_PI * 0.1 * t + p1) + hf * std::sin(2 * M_PI * 0.25 * t + p2) +
                     jitter * rng.normal();
    ibi.onset_s.push_back(t);
    ibi.intervals_ms.push_back(v);
    t += v / 1000.0;
    if (t > duration) break;
  }
  return ibi;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace test_support
