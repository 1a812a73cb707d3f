#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engage/annotation.hpp"
#include "engage/behavior.hpp"
#include "engage/classify.hpp"
#include "engage/eval.hpp"
#include "engage/hrv.hpp"

namespace engage::pipeline {

struct RecordingEntry {
  std::string id;
  std::string participant;
  std::filesystem::path ppg_csv;  // resolved against the manifest directory
  std::filesystem::path engagement_csv;
  std::optional<std::filesystem::path> behavior_csv;
  std::optional<double> fps;
};

// {"recordings": [{"id", "participant", "ppg_csv", "engagement_csv",
//                  "behavior_csv", "fps"}]}; behavior_csv and fps may be null.
struct Manifest {
  std::vector<RecordingEntry> recordings;

  static Manifest load(const std::filesystem::path& path);
};

struct LoadedRecording {
  RecordingEntry entry;
  hrv::PeakList peaks;
  std::vector<annotation::IntervalStat> intervals;
  std::optional<behavior::BehaviorTable> behavior;
  annotation::TimeSpan recording_bounds;  // union of all streams
  annotation::TimeSpan signal_bounds;     // the pulse signal
};

struct FeatureOptions {
  int hrv_window_s = 240;
  std::vector<behavior::FeatureSet> bf_sets;  // empty = HRV only
  hrv::IbiPolicy ibi_policy;
};

struct BuiltDataset {
  classify::FeatureDataset dataset;
  std::vector<annotation::ObservationSample> samples;  // row-aligned with dataset
  std::vector<annotation::DroppedSample> dropped;
};

// All recordings of a manifest, with peaks detected once per recording and a
// single engagement-variability threshold pooled over every interval.
class Corpus {
 public:
  static Corpus load(const Manifest& manifest, const hrv::PeakDetectorOptions& peaks = {});

  const std::vector<LoadedRecording>& recordings() const { return recordings_; }
  double threshold() const { return threshold_; }

  annotation::WindowingResult windows(int hrv_window_s) const;
  // Fused [HRV | BF] rows. Samples whose HRV features cannot be computed or
  // whose behavioural window is empty are dropped with a reason.
  BuiltDataset build(const FeatureOptions& options) const;

 private:
  std::vector<LoadedRecording> recordings_;
  double threshold_ = 0.0;
};

// recording_id, participant_id, center_s, label, then the 24 HRV names.
void write_hrv_csv(const std::filesystem::path& path, const BuiltDataset& built);

struct SweepRow {
  int window_s = 0;
  std::string model;
  std::string bf_sets;
  double accuracy = 0.0;
  std::optional<double> roc_auc;
  double macro_f1 = 0.0;
};

struct SweepOptions {
  std::vector<int> windows{annotation::kHrvWindows.begin(), annotation::kHrvWindows.end()};
  std::vector<classify::ModelKind> models{classify::ModelKind::kKnn, classify::ModelKind::kKnnRf};
  std::vector<std::vector<behavior::FeatureSet>> bf_combinations{{}};
  eval::ExperimentOptions experiment;  // kind is overridden per row
  hrv::IbiPolicy ibi_policy;
};

// One experiment per (window, BF combination, model).
std::vector<SweepRow> run_sweep(const Corpus& corpus, const SweepOptions& options);

// window_s,model,bf_sets,accuracy,roc_auc,macro_f1
std::string sweep_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> parse_sweep_csv(const std::filesystem::path& path);

// Plain-text accuracy / ROC AUC tables, one row per (model, BF sets) and one
// column per window.
std::string render_report(std::span<const SweepRow> rows);

}  // namespace engage::pipeline
