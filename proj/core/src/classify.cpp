#include "engage/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "engage/error.hpp"

namespace engage::classify {

void FeatureDataset::validate() const {
  if (rows.rows() != labels.size() || participant_ids.size() != labels.size()) {
    throw Error(ErrorCode::kShape, "dataset rows, labels and participants differ in count");
  }
  if (!feature_names.empty() && feature_names.size() != rows.cols()) {
    throw Error(ErrorCode::kShape, "feature names do not match the column count");
  }
  for (const double v : rows.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "dataset contains a non-finite value");
  }
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> indices) const {
  FeatureDataset out;
  out.rows = rows.select_rows(indices);
  out.feature_names = feature_names;
  out.labels.reserve(indices.size());
  out.participant_ids.reserve(indices.size());
  for (const auto i : indices) {
    out.labels.push_back(labels[i]);
    out.participant_ids.push_back(participant_ids[i]);
  }
  return out;
}

std::vector<double> fuse(std::span<const double> hrv, std::span<const double> bf, std::size_t expected_bf) {
  if (bf.size() != expected_bf) {
    throw Error(ErrorCode::kShape, "behavioural vector has " + std::to_string(bf.size()) + " values, expected " +
                                       std::to_string(expected_bf));
  }
  std::vector<double> out(hrv.begin(), hrv.end());
  out.insert(out.end(), bf.begin(), bf.end());
  return out;
}

std::vector<std::string> fuse_names(std::span<const std::string_view> hrv_names,
                                    std::span<const std::string> bf_names) {
  std::vector<std::string> out(hrv_names.begin(), hrv_names.end());
  out.insert(out.end(), bf_names.begin(), bf_names.end());
  return out;
}

Standardizer Standardizer::fit(const Matrix& rows) {
  if (rows.rows() == 0) throw Error(ErrorCode::kEmptyInput, "cannot standardize an empty training set");
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += rows(r, c);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  if (n > 1) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) s.std[c] += (rows(r, c) - s.mean[c]) * (rows(r, c) - s.mean[c]);
    }
    for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(n - 1));
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  if (rows.rows() > 0 && rows.cols() != mean.size()) {
    throw Error(ErrorCode::kShape, "standardizer was fitted on " + std::to_string(mean.size()) + " features, got " +
                                       std::to_string(rows.cols()));
  }
  Matrix out(rows.rows(), mean.size());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < mean.size(); ++c) {
      out(r, c) = std[c] > 0.0 ? (rows(r, c) - mean[c]) / std[c] : 0.0;
    }
  }
  return out;
}

KnnModel KnnModel::fit(Matrix rows, std::vector<int> labels, int k, int num_classes) {
  if (rows.rows() != labels.size()) throw Error(ErrorCode::kShape, "knn rows and labels differ in count");
  if (k < 1 || static_cast<std::size_t>(k) > labels.size()) {
    throw Error(ErrorCode::kInvalidK, "k = " + std::to_string(k) + " needs 1 <= k <= " +
                                          std::to_string(labels.size()) + " training rows");
  }
  for (const int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kInvalidArgument, "label outside class range");
  }
  KnnModel m;
  m.rows_ = std::move(rows);
  m.labels_ = std::move(labels);
  m.k_ = k;
  m.num_classes_ = num_classes;
  return m;
}

std::vector<std::size_t> KnnModel::neighbors(std::span<const double> query) const {
  if (query.size() != rows_.cols()) throw Error(ErrorCode::kShape, "query width differs from training width");
  const std::size_t n = rows_.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = rows_.row(i);
    double sum = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) sum += (row[c] - query[c]) * (row[c] - query[c]);
    dist[i] = {sum, i};
  }
  const auto k = static_cast<std::size_t>(k_);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

Matrix KnnModel::predict_proba(const Matrix& queries) const {
  Matrix out(queries.rows(), static_cast<std::size_t>(num_classes_));
  const double share = 1.0 / static_cast<double>(k_);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    for (const auto i : neighbors(queries.row(q))) out(q, static_cast<std::size_t>(labels_[i])) += share;
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& proba) {
  std::vector<int> out(proba.rows(), 0);
  for (std::size_t r = 0; r < proba.rows(); ++r) {
    const auto row = proba.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Prediction ensemble_predict(const Matrix& knn_proba, const Matrix& rf_proba) {
  if (knn_proba.rows() != rf_proba.rows() || knn_proba.cols() != rf_proba.cols()) {
    throw Error(ErrorCode::kShape, "ensemble members disagree on probability matrix shape");
  }
  Prediction p;
  p.proba = Matrix(knn_proba.rows(), knn_proba.cols());
  for (std::size_t r = 0; r < knn_proba.rows(); ++r) {
    for (std::size_t c = 0; c < knn_proba.cols(); ++c) p.proba(r, c) = 0.5 * (knn_proba(r, c) + rf_proba(r, c));
  }
  p.classes = argmax_rows(p.proba);
  return p;
}

Prediction ensemble_predict(const KnnModel& knn, const RandomForest& rf, const Matrix& rows) {
  if (knn.num_classes() != rf.num_classes()) throw Error(ErrorCode::kShape, "ensemble members disagree on class count");
  return ensemble_predict(knn.predict_proba(rows), rf.predict_proba(rows));
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kKnn: return "knn";
    case ModelKind::kRf: return "rf";
    case ModelKind::kKnnRf: return "knn+rf";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "knn") return ModelKind::kKnn;
  if (name == "rf") return ModelKind::kRf;
  if (name == "knn+rf") return ModelKind::kKnnRf;
  throw Error(ErrorCode::kInvalidConfig, "unknown model '" + std::string(name) + "' (knn, rf, knn+rf)");
}

TrainedModel TrainedModel::fit(const FeatureDataset& train, const ModelParams& params, int num_classes) {
  train.validate();
  TrainedModel m;
  m.params_ = params;
  m.num_classes_ = num_classes;
  m.feature_names_ = train.feature_names;
  m.standardizer_ = Standardizer::fit(train.rows);
  Matrix z = m.standardizer_.apply(train.rows);
  if (params.kind != ModelKind::kKnn) {
    m.forest_ = RandomForest::fit(z, train.labels, params.forest, num_classes);
  }
  if (params.kind != ModelKind::kRf) {
    m.knn_ = KnnModel::fit(std::move(z), train.labels, params.k, num_classes);
  }
  return m;
}

Matrix TrainedModel::predict_proba(const Matrix& rows) const {
  const Matrix z = standardizer_.apply(rows);
  switch (params_.kind) {
    case ModelKind::kKnn: return knn_->predict_proba(z);
    case ModelKind::kRf: return forest_->predict_proba(z);
    case ModelKind::kKnnRf: return ensemble_predict(*knn_, *forest_, z).proba;
  }
  return {};
}

Prediction TrainedModel::predict(const Matrix& rows) const {
  Prediction p;
  p.proba = predict_proba(rows);
  p.classes = argmax_rows(p.proba);
  return p;
}

}  // namespace engage::classify
