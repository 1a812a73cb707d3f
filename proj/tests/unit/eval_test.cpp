#include "engage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <map>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "engage/csv.hpp"
#include "engage/rng.hpp"
#include "support.hpp"

namespace engage::eval {
namespace {

using classify::FeatureDataset;
using classify::ModelKind;
using classify::ModelParams;

std::vector<std::string> participants_mod(std::size_t n, std::size_t groups) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("p" + std::to_string(i % groups));
  return out;
}

std::vector<int> cyclic_labels(std::size_t n) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<int>(i % 3));
  return out;
}

FeatureDataset noisy_dataset(std::size_t n, std::uint64_t seed, double separation) {
  Rng rng(seed);
  FeatureDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 3);
    ds.rows.append_row(std::vector<double>{separation * y + rng.normal(), rng.normal(), rng.normal()});
    ds.labels.push_back(y);
    ds.participant_ids.push_back("p" + std::to_string(i % 9));
  }
  ds.feature_names = {"a", "b", "c"};
  return ds;
}

// Mann-Whitney pair count with half credit for ties.
double pair_auc(const std::vector<double>& s, const std::vector<int>& pos) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Split, EightyTwenty) {
  const auto labels = cyclic_labels(100);
  const auto parts = participants_mod(100, 10);
  const auto plan = split_dataset(labels, parts, {0.2, 1});
  EXPECT_EQ(plan.test.size(), 20u);
  EXPECT_EQ(plan.train.size(), 80u);
  std::set<std::size_t> all(plan.train.begin(), plan.train.end());
  for (auto i : plan.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 100u);
}

TEST(Split, StratifiedWithinOne) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> labels;
    const std::size_t n = 20 + rng.uniform_index(200);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(i < 6 ? static_cast<int>(i % 3) : static_cast<int>(rng.uniform_index(3)));
    const auto parts = participants_mod(n, 7);
    const auto plan = split_dataset(labels, parts, {0.2, static_cast<std::uint64_t>(trial)});
    EXPECT_EQ(plan.test.size(), static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
    for (int c = 0; c < 3; ++c) {
      const auto total = std::count(labels.begin(), labels.end(), c);
      const auto in_test = std::count_if(plan.test.begin(), plan.test.end(), [&](auto i) { return labels[i] == c; });
      EXPECT_LE(std::abs(static_cast<double>(in_test) - 0.2 * static_cast<double>(total)), 1.0);
    }
  }
}

TEST(Split, DeterministicPerSeed) {
  const auto labels = cyclic_labels(90);
  const auto parts = participants_mod(90, 9);
  const auto a = split_dataset(labels, parts, {0.2, 5});
  const auto b = split_dataset(labels, parts, {0.2, 5});
  const auto c = split_dataset(labels, parts, {0.2, 6});
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.folds, b.folds);
  EXPECT_NE(a.test, c.test);
}

TEST(Split, Errors) {
  const auto parts = participants_mod(12, 3);
  std::vector<int> labels(12, 0);
  labels[0] = 1;
  labels[1] = 1;
  labels[2] = 2;
  EXPECT_ENGAGE_ERROR(split_dataset(labels, parts, {}), ErrorCode::kStratification);
  EXPECT_ENGAGE_ERROR(split_dataset(cyclic_labels(9), participants_mod(9, 3), {}), ErrorCode::kInsufficientData);
  EXPECT_ENGAGE_ERROR(split_dataset(cyclic_labels(30), participants_mod(30, 3), {1.0}), ErrorCode::kInvalidConfig);
  EXPECT_ENGAGE_ERROR(split_dataset(cyclic_labels(30), participants_mod(29, 3), {}), ErrorCode::kShape);
}

TEST(Folds, PartitionTrainingRows) {
  const auto labels = cyclic_labels(103);
  const auto parts = participants_mod(103, 11);
  const auto plan = split_dataset(labels, parts, {0.2, 3});
  ASSERT_EQ(plan.folds.size(), 5u);
  std::vector<std::size_t> merged;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& f : plan.folds) {
    merged.insert(merged.end(), f.begin(), f.end());
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  std::sort(merged.begin(), merged.end());
  EXPECT_EQ(merged, plan.train);
  EXPECT_LE(hi - lo, 1u);
}

TEST(Folds, SubjectDisjoint) {
  const auto labels = cyclic_labels(120);
  const auto parts = participants_mod(120, 8);
  SplitOptions opts{0.2, 4, FoldMode::kSubjectDisjoint};
  const auto plan = split_dataset(labels, parts, opts);
  ASSERT_EQ(plan.folds.size(), 5u);
  std::map<std::string, std::size_t> owner;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (auto r : plan.folds[f]) {
      auto [it, fresh] = owner.emplace(parts[r], f);
      EXPECT_EQ(it->second, f) << parts[r] << " spans folds";
      (void)fresh;
    }
  }
  EXPECT_ENGAGE_ERROR(split_dataset(labels, participants_mod(120, 4), opts), ErrorCode::kInsufficientData);
}

TEST(Candidates, Grids) {
  const auto knn = default_candidates(ModelKind::kKnn, 1);
  ASSERT_EQ(knn.size(), 4u);
  EXPECT_EQ(knn[0].k, 3);
  EXPECT_EQ(knn[3].k, 11);
  const auto rf = default_candidates(ModelKind::kRf, 1);
  ASSERT_EQ(rf.size(), 1u);
  EXPECT_EQ(rf[0].forest.n_trees, 100);
}

TEST(CrossValidate, TiesGoToSmallerK) {
  // Two perfectly separated clusters: every k scores 1.0.
  FeatureDataset ds;
  Rng rng(5);
  for (int i = 0; i < 90; ++i) {
    const int y = i % 3;
    ds.rows.append_row(std::vector<double>{100.0 * y + 0.01 * rng.normal()});
    ds.labels.push_back(y);
    ds.participant_ids.push_back("p" + std::to_string(i % 6));
  }
  ds.feature_names = {"x"};
  const auto plan = split_dataset(ds.labels, ds.participant_ids, {0.2, 1});
  std::vector<ModelParams> cands(3);
  for (std::size_t i = 0; i < 3; ++i) {
    cands[i].kind = ModelKind::kKnn;
    cands[i].k = std::array{7, 3, 5}[i];
  }
  const auto cv = cross_validate(ds, plan, cands);
  for (double m : cv.mean_accuracy) EXPECT_EQ(m, 1.0);
  EXPECT_EQ(cv.best_params().k, 3);
  EXPECT_ENGAGE_ERROR(cross_validate(ds, plan, std::vector<ModelParams>{}), ErrorCode::kInvalidConfig);
}

TEST(CrossValidate, ScoresEveryCandidateOnEveryFold) {
  const auto ds = noisy_dataset(120, 6, 1.0);
  const auto plan = split_dataset(ds.labels, ds.participant_ids, {0.2, 2});
  const auto cands = default_candidates(ModelKind::kKnnRf, 2);
  const auto cv = cross_validate(ds, plan, cands);
  ASSERT_EQ(cv.fold_accuracy.size(), cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) {
    ASSERT_EQ(cv.fold_accuracy[c].size(), 5u);
    for (double a : cv.fold_accuracy[c]) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
    EXPECT_LE(cv.mean_accuracy[c], cv.mean_accuracy[cv.best]);
  }
}

TEST(Metrics, Perfect) {
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  Matrix p(6, 3);
  for (std::size_t i = 0; i < 6; ++i) p(i, static_cast<std::size_t>(y[i])) = 1.0;
  const auto m = compute_metrics(y, y, p);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  ASSERT_TRUE(m.macro_roc_auc);
  EXPECT_EQ(*m.macro_roc_auc, 1.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(m.confusion[c][c], 2u);
}

TEST(Metrics, HandExample) {
  const std::vector<int> truth{0, 1};
  const std::vector<int> pred{1, 1};
  Matrix p(2, 3);
  p(0, 1) = p(1, 1) = 1.0;
  const auto m = compute_metrics(truth, pred, p);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_NEAR(m.f1[1], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(m.f1[0], 0.0);
  EXPECT_FALSE(m.roc_auc[2].has_value());
  EXPECT_ENGAGE_ERROR(compute_metrics(std::vector<int>{}, std::vector<int>{}, Matrix(0, 3)), ErrorCode::kEmptyInput);
}

TEST(Metrics, ConfusionConsistency) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(80);
    std::vector<int> truth(n), pred(n);
    Matrix p(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.uniform_index(3));
      double s = 0;
      for (std::size_t c = 0; c < 3; ++c) s += (p(i, c) = rng.uniform());
      for (std::size_t c = 0; c < 3; ++c) p(i, c) /= s;
    }
    pred = classify::argmax_rows(p);
    const auto m = compute_metrics(truth, pred, p);
    std::size_t trace = 0, total = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      std::size_t row = 0;
      for (auto v : m.confusion[r]) row += v;
      EXPECT_EQ(row, static_cast<std::size_t>(std::count(truth.begin(), truth.end(), static_cast<int>(r))));
      trace += m.confusion[r][r];
      total += row;
    }
    EXPECT_EQ(total, n);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(trace) / static_cast<double>(n));
  }
}

TEST(RocAuc, MatchesPairCounting) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 4 + rng.uniform_index(60);
    std::vector<double> s(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 8.0) / 8.0;  // plenty of ties
      pos[i] = rng.uniform() < 0.4;
    }
    pos[0] = 1;
    pos[1] = 0;
    const auto auc = binary_roc_auc(s, pos);
    ASSERT_TRUE(auc);
    EXPECT_NEAR(*auc, pair_auc(s, pos), 1e-12);
  }
}

TEST(RocAuc, RandomScoresNearHalf) {
  Rng rng(9);
  std::vector<double> s(20000);
  std::vector<int> pos(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    pos[i] = rng.uniform() < 0.5;
  }
  EXPECT_NEAR(*binary_roc_auc(s, pos), 0.5, 0.02);
}

TEST(RocAuc, PerfectAndUndefined) {
  EXPECT_EQ(*binary_roc_auc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_FALSE(binary_roc_auc(std::vector<double>{0.9, 0.8}, std::vector<int>{1, 1}));
}

TEST(HrError, Examples) {
  const std::vector<double> est{70, 75, 80};
  const std::vector<double> ref{72, 72, 84};
  const auto e = hr_error(est, ref);
  EXPECT_DOUBLE_EQ(e.mae, 3.0);
  EXPECT_NEAR(e.rmse, std::sqrt(29.0 / 3.0), 1e-12);
  EXPECT_NEAR(e.rmse, 3.1091, 1e-4);
  const auto f = hr_error(std::vector<double>{60, 66}, std::vector<double>{63, 63});
  EXPECT_DOUBLE_EQ(f.mae, 3.0);
  EXPECT_DOUBLE_EQ(f.rmse, 3.0);
  const auto g = hr_error(std::vector<double>{60, 68}, std::vector<double>{62, 64});
  EXPECT_DOUBLE_EQ(g.mae, 3.0);
  EXPECT_NEAR(g.rmse, 3.1623, 1e-4);
  EXPECT_ENGAGE_ERROR(hr_error(std::vector<double>{}, std::vector<double>{}), ErrorCode::kEmptyInput);
  EXPECT_ENGAGE_ERROR(hr_error(std::vector<double>{1}, std::vector<double>{1, 2}), ErrorCode::kShape);
}

TEST(HrError, RmseDominatesMae) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(10), b(10);
    for (std::size_t i = 0; i < 10; ++i) {
      a[i] = rng.uniform(50, 120);
      b[i] = rng.uniform(50, 120);
    }
    const auto e = hr_error(a, b);
    EXPECT_GE(e.rmse + 1e-12, e.mae);
  }
}

TEST(Reports, JsonAndConfusionCsv) {
  test_support::TempDir dir;
  const std::vector<int> truth{0, 1, 2, 2};
  const std::vector<int> pred{0, 1, 1, 2};
  Matrix p(4, 3);
  for (std::size_t i = 0; i < 4; ++i) p(i, static_cast<std::size_t>(pred[i])) = 1.0;
  const auto m = compute_metrics(truth, pred, p);
  const auto j = nlohmann::json::parse(metrics_json(m));
  EXPECT_EQ(j.at("classes"), (nlohmann::json{"Low", "Medium", "High"}));
  EXPECT_EQ(j.at("samples"), 4);
  EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 0.75);
  EXPECT_EQ(j.at("confusion")[2][1], 1);
  write_confusion_csv(dir / "c.csv", m);
  const auto table = csv::read(dir / "c.csv");
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[2][0], "High");
  EXPECT_EQ(table.rows[2][2], "1");
  EXPECT_EQ(table.rows[2][3], "1");
}

TEST(Experiment, DeterministicAndSensible) {
  const auto ds = noisy_dataset(150, 11, 4.0);
  ExperimentOptions opts;
  opts.seed = 3;
  const auto a = run_experiment(ds, opts);
  const auto b = run_experiment(ds, opts);
  EXPECT_EQ(metrics_json(a.test), metrics_json(b.test));
  EXPECT_EQ(a.test.samples, 30u);
  EXPECT_GE(a.test.accuracy, 0.8);
  EXPECT_EQ(a.model.to_json(), b.model.to_json());
}

}  // namespace
}  // namespace engage::eval
