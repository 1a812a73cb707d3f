#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engage/matrix.hpp"

namespace engage::behavior {

// Behavioural feature groups, numbered as in the facial-analysis tool's
// output documentation.
enum class FeatureSet : int {
  kGazeVector = 1,    // gaze_{0,1}_{x,y,z}
  kGazeAngle = 2,     // gaze_angle_{x,y}
  kEyeLandmarks = 3,  // eye_lmk_{x,y,X,Y,Z}_0..55
  kHeadPose = 4,      // pose_T{x,y,z}, pose_R{x,y,z}
  kActionUnits = 5,   // AU.._r intensities then AU.._c presence
};

inline constexpr std::array<FeatureSet, 5> kAllFeatureSets = {
    FeatureSet::kGazeVector, FeatureSet::kGazeAngle, FeatureSet::kEyeLandmarks,
    FeatureSet::kHeadPose, FeatureSet::kActionUnits};

inline constexpr std::array<std::string_view, 17> kActionUnitIds = {
    "01", "02", "04", "05", "06", "07", "09", "10", "12",
    "14", "15", "17", "20", "23", "25", "26", "45"};

// Column names of one set, in registry order.
const std::vector<std::string>& set_columns(FeatureSet set);
std::size_t set_size(FeatureSet set);
// All 328 registered columns, sets 1..5 in order.
const std::vector<std::string>& registered_columns();

FeatureSet parse_set_id(int id);
// "4,5" -> {kHeadPose, kActionUnits}. "" or "none" -> {}.
std::vector<FeatureSet> parse_set_list(std::string_view text);
std::string format_set_list(std::span<const FeatureSet> sets);

inline constexpr double kMinTrackingConfidence = 0.75;

// Per-frame behavioural features restricted to the registered columns.
class BehaviorTable {
 public:
  // Loads tool output. Timestamps come from a `timestamp` column, or
  // row_index / fps when absent. Rows are stably sorted by time. Frames with
  // a `confidence` below 0.75 are kept but excluded from averages.
  static BehaviorTable load(const std::filesystem::path& path, std::optional<double> fps = std::nullopt);
  static BehaviorTable from_columns(std::vector<double> timestamps, Matrix features,
                                    std::vector<bool> tracked = {});

  std::size_t frames() const { return timestamps_.size(); }
  const std::vector<double>& timestamps() const { return timestamps_; }
  const Matrix& features() const { return features_; }
  bool tracked(std::size_t frame) const { return tracked_[frame]; }

  // Position of a registered column in features().
  std::size_t column_index(std::string_view name) const;

 private:
  std::vector<double> timestamps_;
  Matrix features_;  // frames x 328
  std::vector<bool> tracked_;
};

struct FeatureSelection {
  std::vector<std::size_t> columns;
  std::vector<std::string> names;

  std::size_t size() const { return columns.size(); }
};

// Union of the requested sets in registry order. Ids must be non-empty and
// unique.
FeatureSelection select_feature_sets(std::span<const FeatureSet> sets);

// Mean of each selected column over tracked frames with timestamps inside
// the closed window [center - width / 2, center + width / 2]. Empty when no
// frame qualifies.
std::optional<std::vector<double>> window_average(const BehaviorTable& table,
                                                  const FeatureSelection& selection,
                                                  double center_s, double width_s = 2.0);

// Writes a table in the tool's column convention (frame, timestamp,
// confidence, success, then the registered columns).
void write_behavior_csv(const std::filesystem::path& path, const BehaviorTable& table,
                        int significant_digits = 5);

}  // namespace engage::behavior
