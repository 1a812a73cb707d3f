#include "engage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "engage/annotation.hpp"
#include "engage/csv.hpp"
#include "engage/error.hpp"
#include "engage/rng.hpp"

namespace engage::eval {

using classify::FeatureDataset;
using classify::ModelKind;
using classify::ModelParams;

namespace {

std::vector<std::size_t> class_counts(std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kInvalidArgument, "label outside class range");
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

double accuracy_of(const Matrix& proba, std::span<const std::size_t> rows, std::span<const int> labels) {
  const auto predicted = classify::argmax_rows(proba);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) hits += predicted[i] == labels[rows[i]];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace

std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> rows,
                                                 std::span<const std::string> participants, FoldMode mode,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(kNumFolds);
  if (mode == FoldMode::kSampleLevel) {
    if (rows.size() < static_cast<std::size_t>(kNumFolds)) {
      throw Error(ErrorCode::kInsufficientData, "need at least 5 training rows for 5 folds");
    }
    std::vector<std::size_t> order(rows.begin(), rows.end());
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % kNumFolds].push_back(order[i]);
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (const auto r : rows) groups[participants[r]].push_back(r);
    if (groups.size() < static_cast<std::size_t>(kNumFolds)) {
      throw Error(ErrorCode::kInsufficientData, "subject-disjoint folds need at least 5 participants");
    }
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [id, members] : groups) order.push_back(&members);
    rng.shuffle(order);
    for (const auto* members : order) {
      auto smallest = std::min_element(folds.begin(), folds.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); });
      smallest->insert(smallest->end(), members->begin(), members->end());
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

SplitPlan split_dataset(std::span<const int> labels, std::span<const std::string> participants,
                        const SplitOptions& options) {
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "test fraction must lie in (0, 1)");
  }
  if (participants.size() != labels.size()) throw Error(ErrorCode::kShape, "labels and participants differ in count");
  const std::size_t n = labels.size();
  if (n < 10) throw Error(ErrorCode::kInsufficientData, "need at least 10 samples to split, got " + std::to_string(n));
  const auto counts = class_counts(labels, options.num_classes);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 2) {
      throw Error(ErrorCode::kStratification, "class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                                  " samples; stratified splitting needs at least 2");
    }
  }

  const std::size_t k = counts.size();
  std::vector<std::size_t> n_test(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = options.test_fraction * static_cast<double>(counts[c]);
    n_test[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += n_test[c];
    remainders.push_back({-(exact - std::floor(exact)), c});
  }
  const auto target = static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(n)));
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    const auto c = remainders[i].second;
    if (n_test[c] + 1 < counts[c]) {
      ++n_test[c];
      ++assigned;
    }
  }

  Rng rng(options.seed);
  SplitPlan plan;
  plan.seed = options.seed;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(labels[i]) == c) members.push_back(i);
    }
    rng.shuffle(members);
    plan.test.insert(plan.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test[c]));
    plan.train.insert(plan.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test[c]), members.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  plan.folds = make_folds(plan.train, participants, options.fold_mode, derive_seed(options.seed, 1));
  return plan;
}

std::vector<ModelParams> default_candidates(ModelKind kind, std::uint64_t seed) {
  std::vector<ModelParams> out;
  ModelParams base;
  base.kind = kind;
  base.forest.n_trees = 100;
  base.forest.seed = seed;
  if (kind == ModelKind::kRf) {
    out.push_back(base);
    return out;
  }
  for (const int k : {3, 5, 7, 11}) {
    base.k = k;
    out.push_back(base);
  }
  return out;
}

CvResult cross_validate(const FeatureDataset& data, const SplitPlan& plan, std::span<const ModelParams> candidates,
                        int num_classes) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidConfig, "no candidate hyperparameters to evaluate");
  if (plan.folds.size() < 2) throw Error(ErrorCode::kInvalidConfig, "cross-validation needs at least two folds");
  data.validate();
  std::vector<int> train_labels;
  for (const auto r : plan.train) train_labels.push_back(data.labels[r]);
  const auto counts = class_counts(train_labels, num_classes);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < static_cast<std::size_t>(kNumFolds)) {
      throw Error(ErrorCode::kStratification, "class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                                  " training samples; cross-validation needs at least 5");
    }
  }

  CvResult result;
  result.candidates.assign(candidates.begin(), candidates.end());
  result.fold_accuracy.assign(candidates.size(), std::vector<double>(plan.folds.size(), 0.0));

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    std::vector<std::size_t> fit_rows;
    for (std::size_t g = 0; g < plan.folds.size(); ++g) {
      if (g != f) fit_rows.insert(fit_rows.end(), plan.folds[g].begin(), plan.folds[g].end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    const auto& val_rows = plan.folds[f];
    if (val_rows.empty()) throw Error(ErrorCode::kInsufficientData, "empty validation fold");

    const auto fit_part = data.subset(fit_rows);
    const auto scaler = classify::Standardizer::fit(fit_part.rows);
    const Matrix z_fit = scaler.apply(fit_part.rows);
    const Matrix z_val = scaler.apply(data.rows.select_rows(val_rows));

    std::map<std::tuple<int, std::uint64_t, bool>, Matrix> forest_cache;
    std::map<int, Matrix> knn_cache;
    auto forest_proba = [&](const classify::ForestOptions& fo) -> const Matrix& {
      const auto key = std::make_tuple(fo.n_trees, fo.seed, fo.class_weighting);
      auto it = forest_cache.find(key);
      if (it == forest_cache.end()) {
        const auto forest = classify::RandomForest::fit(z_fit, fit_part.labels, fo, num_classes);
        it = forest_cache.emplace(key, forest.predict_proba(z_val)).first;
      }
      return it->second;
    };
    auto knn_proba = [&](int k) -> const Matrix& {
      auto it = knn_cache.find(k);
      if (it == knn_cache.end()) {
        const auto knn = classify::KnnModel::fit(z_fit, fit_part.labels, k, num_classes);
        it = knn_cache.emplace(k, knn.predict_proba(z_val)).first;
      }
      return it->second;
    };

    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& p = candidates[c];
      Matrix proba;
      switch (p.kind) {
        case ModelKind::kKnn: proba = knn_proba(p.k); break;
        case ModelKind::kRf: proba = forest_proba(p.forest); break;
        case ModelKind::kKnnRf: proba = classify::ensemble_predict(knn_proba(p.k), forest_proba(p.forest)).proba; break;
      }
      result.fold_accuracy[c][f] = accuracy_of(proba, val_rows, data.labels);
    }
  }

  result.mean_accuracy.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& acc = result.fold_accuracy[c];
    result.mean_accuracy[c] = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  }
  auto simpler = [&](std::size_t a, std::size_t b) {
    const auto& pa = candidates[a];
    const auto& pb = candidates[b];
    const int ta = pa.kind == ModelKind::kKnn ? 0 : pa.forest.n_trees;
    const int tb = pb.kind == ModelKind::kKnn ? 0 : pb.forest.n_trees;
    if (ta != tb) return ta < tb;
    return pa.k < pb.k;
  };
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double m = result.mean_accuracy[c];
    const double best = result.mean_accuracy[result.best];
    if (m > best || (m == best && simpler(c, result.best))) result.best = c;
  }
  return result;
}

std::optional<double> binary_roc_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::kShape, "scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](int p) { return p != 0; }));
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    double tp_next = tp;
    double fp_next = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      if (positive[order[i]] != 0) {
        tp_next += 1.0;
      } else {
        fp_next += 1.0;
      }
    }
    area += (fp_next - fp) * (tp_next + tp) * 0.5;
    tp = tp_next;
    fp = fp_next;
  }
  return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, const Matrix& proba,
                              int num_classes) {
  const std::size_t n = truth.size();
  if (predicted.size() != n || proba.rows() != n || (n > 0 && proba.cols() != static_cast<std::size_t>(num_classes))) {
    throw Error(ErrorCode::kShape, "labels, predictions and probabilities disagree in shape");
  }
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "no samples to score");
  const auto k = static_cast<std::size_t>(num_classes);

  MetricsReport m;
  m.samples = n;
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "label outside class range");
    }
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t hits = 0;
  for (std::size_t c = 0; c < k; ++c) hits += m.confusion[c][c];
  m.accuracy = static_cast<double>(hits) / static_cast<double>(n);

  m.f1.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted_c = 0;
    std::size_t actual_c = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted_c += m.confusion[o][c];
      actual_c += m.confusion[c][o];
    }
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double precision = predicted_c ? tp / static_cast<double>(predicted_c) : 0.0;
    const double recall = actual_c ? tp / static_cast<double>(actual_c) : 0.0;
    m.f1[c] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / static_cast<double>(k);

  double auc_sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> scores(n);
  std::vector<int> is_pos(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = proba(i, c);
      is_pos[i] = static_cast<std::size_t>(truth[i]) == c;
    }
    const auto auc = binary_roc_auc(scores, is_pos);
    m.roc_auc.push_back(auc);
    if (auc) {
      auc_sum += *auc;
      ++defined;
    }
  }
  if (defined > 0) m.macro_roc_auc = auc_sum / static_cast<double>(defined);
  return m;
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < report.f1.size(); ++c) {
    classes.emplace_back(annotation::class_name(static_cast<annotation::EngagementClass>(c)));
  }
  j["classes"] = classes;
  j["samples"] = report.samples;
  j["accuracy"] = report.accuracy;
  j["f1"] = report.f1;
  j["macro_f1"] = report.macro_f1;
  nlohmann::ordered_json aucs = nlohmann::ordered_json::array();
  for (const auto& a : report.roc_auc) aucs.push_back(a ? nlohmann::ordered_json(*a) : nlohmann::ordered_json());
  j["roc_auc"] = aucs;
  j["macro_roc_auc"] = report.macro_roc_auc ? nlohmann::ordered_json(*report.macro_roc_auc) : nlohmann::ordered_json();
  j["confusion"] = report.confusion;
  return j.dump(2);
}

void write_confusion_csv(const std::filesystem::path& path, const MetricsReport& report) {
  const std::size_t k = report.confusion.size();
  std::vector<std::string> header{"true\\predicted"};
  for (std::size_t c = 0; c < k; ++c) {
    header.emplace_back(annotation::class_name(static_cast<annotation::EngagementClass>(c)));
  }
  std::string text = csv::join(header) + "\n";
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<std::string> cells{header[r + 1]};
    for (const auto v : report.confusion[r]) cells.push_back(std::to_string(v));
    text += csv::join(cells) + "\n";
  }
  csv::write_text_file(path, text);
}

HrError hr_error(std::span<const double> estimated_bpm, std::span<const double> reference_bpm) {
  if (estimated_bpm.size() != reference_bpm.size()) throw Error(ErrorCode::kShape, "sequences differ in length");
  if (estimated_bpm.empty()) throw Error(ErrorCode::kEmptyInput, "no heart-rate estimates");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < estimated_bpm.size(); ++i) {
    const double e = estimated_bpm[i] - reference_bpm[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(estimated_bpm.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

ExperimentResult run_experiment(const FeatureDataset& data, const ExperimentOptions& options) {
  data.validate();
  SplitOptions split;
  split.test_fraction = options.test_fraction;
  split.seed = options.seed;
  split.fold_mode = options.fold_mode;
  auto plan = split_dataset(data.labels, data.participant_ids, split);

  auto candidates = default_candidates(options.kind, derive_seed(options.seed, 2));
  for (auto& c : candidates) c.forest.class_weighting = options.class_weighting;
  auto cv = cross_validate(data, plan, candidates);

  const auto train = data.subset(plan.train);
  auto model = classify::TrainedModel::fit(train, cv.best_params());
  const auto test = data.subset(plan.test);
  const auto prediction = model.predict(test.rows);
  auto metrics = compute_metrics(test.labels, prediction.classes, prediction.proba);
  return {std::move(plan), std::move(cv), std::move(model), std::move(metrics)};
}

}  // namespace engage::eval
