#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engage/classify.hpp"

namespace engage::eval {

enum class FoldMode {
  kSampleLevel,      // the same participant may appear in training and validation folds
  kSubjectDisjoint,  // every participant sits in exactly one fold
};

inline constexpr int kNumFolds = 5;

struct SplitPlan {
  std::vector<std::size_t> train;  // dataset row indices
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  // folds[f] holds dataset row indices; the folds partition `train`.
  std::vector<std::vector<std::size_t>> folds;
};

struct SplitOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  FoldMode fold_mode = FoldMode::kSampleLevel;
  int num_classes = classify::kDefaultClasses;
};

// Seeded, class-stratified split. Each class contributes
// floor(test_fraction * n_c) test rows; the remaining test slots needed to
// reach round(test_fraction * n) go to the classes with the largest
// fractional parts (lower class id on ties).
SplitPlan split_dataset(std::span<const int> labels, std::span<const std::string> participants,
                        const SplitOptions& options);

// Partitions `rows` into kNumFolds folds.
std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> rows,
                                                 std::span<const std::string> participants, FoldMode mode,
                                                 std::uint64_t seed);

// k in {3, 5, 7, 11} for knn and the ensemble; a single 100-tree forest for rf.
std::vector<classify::ModelParams> default_candidates(classify::ModelKind kind, std::uint64_t seed);

struct CvResult {
  std::vector<classify::ModelParams> candidates;
  std::vector<std::vector<double>> fold_accuracy;  // [candidate][fold]
  std::vector<double> mean_accuracy;
  std::size_t best = 0;

  const classify::ModelParams& best_params() const { return candidates[best]; }
};

// Mean validation accuracy per candidate over the folds of `plan`. Equal
// means resolve to the simpler candidate (fewer trees, then smaller k).
CvResult cross_validate(const classify::FeatureDataset& data, const SplitPlan& plan,
                        std::span<const classify::ModelParams> candidates,
                        int num_classes = classify::kDefaultClasses);

struct MetricsReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  std::vector<double> f1;  // per class
  double macro_f1 = 0.0;
  // One-vs-rest AUC per class; empty when the class has no positives or no
  // negatives in the evaluated set.
  std::vector<std::optional<double>> roc_auc;
  // Mean over the classes whose AUC is defined.
  std::optional<double> macro_roc_auc;
  std::vector<std::vector<std::size_t>> confusion;  // rows = true class
};

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, const Matrix& proba,
                              int num_classes = classify::kDefaultClasses);

// Area under the ROC curve of `scores` for binary labels (nonzero =
// positive), by trapezoidal integration with tied scores grouped into one
// step. Empty when either class is absent.
std::optional<double> binary_roc_auc(std::span<const double> scores, std::span<const int> positive);

std::string metrics_json(const MetricsReport& report);
void write_confusion_csv(const std::filesystem::path& path, const MetricsReport& report);

struct HrError {
  double mae = 0.0;
  double rmse = 0.0;
};

HrError hr_error(std::span<const double> estimated_bpm, std::span<const double> reference_bpm);

struct ExperimentOptions {
  classify::ModelKind kind = classify::ModelKind::kKnnRf;
  std::uint64_t seed = 0;
  FoldMode fold_mode = FoldMode::kSampleLevel;
  bool class_weighting = false;
  double test_fraction = 0.2;
};

struct ExperimentResult {
  SplitPlan plan;
  CvResult cv;
  classify::TrainedModel model;
  MetricsReport test;
};

// Split, cross-validate on the training part, refit the winner on all
// training rows, and score the held-out test rows.
ExperimentResult run_experiment(const classify::FeatureDataset& data, const ExperimentOptions& options);

}  // namespace engage::eval
