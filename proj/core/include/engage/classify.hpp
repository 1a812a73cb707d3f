#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engage/matrix.hpp"

namespace engage::classify {

inline constexpr int kDefaultClasses = 3;

struct FeatureDataset {
  Matrix rows;  // n x d
  std::vector<int> labels;
  std::vector<std::string> participant_ids;
  std::vector<std::string> feature_names;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return rows.cols(); }

  // Checks the length invariants and that every entry is finite.
  void validate() const;
  FeatureDataset subset(std::span<const std::size_t> indices) const;
};

// [hrv | bf]. bf must hold exactly expected_bf values.
std::vector<double> fuse(std::span<const double> hrv, std::span<const double> bf, std::size_t expected_bf);
std::vector<std::string> fuse_names(std::span<const std::string_view> hrv_names,
                                    std::span<const std::string> bf_names);

// Per-feature z-score with the training mean and sample std (divisor n - 1).
// Zero-variance features map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Standardizer fit(const Matrix& rows);
  Matrix apply(const Matrix& rows) const;
};

// Class fractions among the k nearest training rows (Euclidean). Distance
// ties go to the lower training index.
class KnnModel {
 public:
  static KnnModel fit(Matrix rows, std::vector<int> labels, int k, int num_classes = kDefaultClasses);

  Matrix predict_proba(const Matrix& queries) const;
  // Indices of the k nearest training rows, nearest first.
  std::vector<std::size_t> neighbors(std::span<const double> query) const;

  int k() const { return k_; }
  int num_classes() const { return num_classes_; }
  const Matrix& rows() const { return rows_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Matrix rows_;
  std::vector<int> labels_;
  int k_ = 1;
  int num_classes_ = kDefaultClasses;
};

struct ForestOptions {
  int n_trees = 100;
  std::uint64_t seed = 0;
  // Weight samples by n / (num_classes * class_count) in the Gini criterion.
  bool class_weighting = false;
};

// CART trees in flat arrays. Node i is a leaf when feature[i] < 0; its class
// distribution starts at value_offset[i].
struct DecisionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<int> value_offset;
  std::vector<double> values;

  std::size_t nodes() const { return feature.size(); }
  std::span<const double> leaf_for(std::span<const double> row, int num_classes) const;
};

// Bootstrap-aggregated Gini trees with ceil(sqrt(d)) candidate features per
// node, grown until pure or fewer than two samples. Tree t draws from
// Rng(seed + t), so results do not depend on fitting order.
class RandomForest {
 public:
  static RandomForest fit(const Matrix& rows, std::span<const int> labels, const ForestOptions& options,
                          int num_classes = kDefaultClasses);

  Matrix predict_proba(const Matrix& queries) const;

  int num_classes() const { return num_classes_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  static RandomForest from_trees(std::vector<DecisionTree> trees, int num_classes);

 private:
  std::vector<DecisionTree> trees_;
  int num_classes_ = kDefaultClasses;
};

struct Prediction {
  std::vector<int> classes;
  Matrix proba;
};

// Row argmax; exact ties resolve to the lowest class id.
std::vector<int> argmax_rows(const Matrix& proba);

// Soft voting: elementwise mean of the two probability matrices.
Prediction ensemble_predict(const Matrix& knn_proba, const Matrix& rf_proba);
Prediction ensemble_predict(const KnnModel& knn, const RandomForest& rf, const Matrix& rows);

enum class ModelKind { kKnn, kRf, kKnnRf };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelParams {
  ModelKind kind = ModelKind::kKnnRf;
  int k = 5;
  ForestOptions forest;
};

// Standardization plus the fitted knn and/or forest. Immutable once built.
class TrainedModel {
 public:
  static TrainedModel fit(const FeatureDataset& train, const ModelParams& params,
                          int num_classes = kDefaultClasses);

  // Raw (unstandardized) rows in, probability rows out.
  Matrix predict_proba(const Matrix& rows) const;
  Prediction predict(const Matrix& rows) const;

  ModelKind kind() const { return params_.kind; }
  const ModelParams& params() const { return params_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  int num_classes() const { return num_classes_; }

  // Versioned JSON holding the stats, neighbour store and tree arrays.
  std::string to_json() const;
  static TrainedModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  ModelParams params_;
  int num_classes_ = kDefaultClasses;
  Standardizer standardizer_;
  std::vector<std::string> feature_names_;
  std::optional<KnnModel> knn_;
  std::optional<RandomForest> forest_;

  friend struct ModelCodec;
};

}  // namespace engage::classify
