#include <algorithm>
#include <cmath>
#include <numeric>

#include "engage/classify.hpp"
#include "engage/error.hpp"
#include "engage/rng.hpp"

namespace engage::classify {

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini, lower is better
  std::size_t left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& rows, std::span<const int> labels, std::span<const double> weights, int num_classes,
              Rng& rng)
      : rows_(rows), labels_(labels), weights_(weights), k_(static_cast<std::size_t>(num_classes)), rng_(rng) {
    const std::size_t d = rows.cols();
    max_features_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    grow(0, samples_.size());
    return std::move(tree_);
  }

 private:
  std::vector<double> distribution(std::size_t begin, std::size_t end) const {
    std::vector<double> dist(k_, 0.0);
    for (std::size_t i = begin; i < end; ++i) dist[static_cast<std::size_t>(labels_[samples_[i]])] += weights_[samples_[i]];
    return dist;
  }

  int add_leaf(const std::vector<double>& dist) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const int id = static_cast<int>(tree_.feature.size());
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value_offset.push_back(static_cast<int>(tree_.values.size()));
    for (const double w : dist) tree_.values.push_back(w / total);
    return id;
  }

  static double gini_mass(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double sq = 0.0;
    for (const double c : counts) sq += c * c;
    return total - sq / total;  // total * gini
  }

  // Best threshold on one feature, or nullopt when the feature is constant
  // over the node.
  std::optional<SplitCandidate> best_on_feature(int f, std::size_t begin, std::size_t end,
                                                const std::vector<double>& parent) {
    const auto col = static_cast<std::size_t>(f);
    order_.clear();
    for (std::size_t i = begin; i < end; ++i) order_.push_back({rows_(samples_[i], col), samples_[i]});
    std::sort(order_.begin(), order_.end());
    if (!(order_.front().first < order_.back().first)) return std::nullopt;

    const double total = std::accumulate(parent.begin(), parent.end(), 0.0);
    std::vector<double> left(k_, 0.0);
    std::vector<double> right = parent;
    double left_total = 0.0;
    SplitCandidate best;
    bool found = false;
    for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
      const auto s = order_[i].second;
      const double w = weights_[s];
      const auto y = static_cast<std::size_t>(labels_[s]);
      left[y] += w;
      right[y] -= w;
      left_total += w;
      if (!(order_[i].first < order_[i + 1].first)) continue;
      const double impurity = gini_mass(left, left_total) + gini_mass(right, total - left_total);
      if (!found || impurity < best.impurity) {
        found = true;
        best.feature = f;
        best.impurity = impurity;
        double mid = 0.5 * (order_[i].first + order_[i + 1].first);
        if (!(mid < order_[i + 1].first)) mid = order_[i].first;
        best.threshold = mid;
        best.left_count = i + 1;
      }
    }
    return best;
  }

  int grow(std::size_t begin, std::size_t end) {
    const auto dist = distribution(begin, end);
    const auto occupied = std::count_if(dist.begin(), dist.end(), [](double w) { return w > 0.0; });
    if (end - begin < 2 || occupied <= 1) return add_leaf(dist);

    // Draw features without replacement until max_features non-constant ones
    // have been examined; constant features do not count toward the budget.
    std::optional<SplitCandidate> best;
    std::size_t examined = 0;
    for (std::size_t drawn = 0; drawn < features_.size() && examined < max_features_; ++drawn) {
      const std::size_t j = drawn + rng_.uniform_index(features_.size() - drawn);
      std::swap(features_[drawn], features_[j]);
      const auto candidate = best_on_feature(features_[drawn], begin, end, dist);
      if (!candidate) continue;
      ++examined;
      if (!best || candidate->impurity < best->impurity) best = candidate;
    }
    if (!best) return add_leaf(dist);

    const auto col = static_cast<std::size_t>(best->feature);
    const auto mid_it = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                              samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                              [&](std::size_t s) { return rows_(s, col) <= best->threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

    const int id = static_cast<int>(tree_.feature.size());
    tree_.feature.push_back(best->feature);
    tree_.threshold.push_back(best->threshold);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value_offset.push_back(-1);
    const int l = grow(begin, mid);
    const int r = grow(mid, end);
    tree_.left[static_cast<std::size_t>(id)] = l;
    tree_.right[static_cast<std::size_t>(id)] = r;
    return id;
  }

  const Matrix& rows_;
  std::span<const int> labels_;
  std::span<const double> weights_;
  std::size_t k_;
  Rng& rng_;
  std::size_t max_features_ = 1;
  std::vector<int> features_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, std::size_t>> order_;
  DecisionTree tree_;
};

}  // namespace

std::span<const double> DecisionTree::leaf_for(std::span<const double> row, int num_classes) const {
  std::size_t node = 0;
  while (feature[node] >= 0) {
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                    : right[node]);
  }
  return {values.data() + value_offset[node], static_cast<std::size_t>(num_classes)};
}

RandomForest RandomForest::fit(const Matrix& rows, std::span<const int> labels, const ForestOptions& options,
                               int num_classes) {
  if (options.n_trees < 1) throw Error(ErrorCode::kInvalidConfig, "forest needs at least one tree");
  if (rows.rows() != labels.size()) throw Error(ErrorCode::kShape, "forest rows and labels differ in count");
  if (rows.rows() < 2) throw Error(ErrorCode::kInsufficientData, "forest needs at least two training rows");
  for (const int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kInvalidArgument, "label outside class range");
  }
  const std::size_t n = rows.rows();
  std::vector<double> weights(n, 1.0);
  if (options.class_weighting) {
    std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
    for (const int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      weights[i] = static_cast<double>(n) / (num_classes * counts[static_cast<std::size_t>(labels[i])]);
    }
  }

  RandomForest forest;
  forest.num_classes_ = num_classes;
  forest.trees_.reserve(static_cast<std::size_t>(options.n_trees));
  for (int t = 0; t < options.n_trees; ++t) {
    Rng rng(options.seed + static_cast<std::uint64_t>(t));
    std::vector<std::size_t> bootstrap(n);
    for (auto& s : bootstrap) s = rng.uniform_index(n);
    TreeBuilder builder(rows, labels, weights, num_classes, rng);
    forest.trees_.push_back(builder.build(std::move(bootstrap)));
  }
  return forest;
}

RandomForest RandomForest::from_trees(std::vector<DecisionTree> trees, int num_classes) {
  if (trees.empty()) throw Error(ErrorCode::kInvalidConfig, "forest needs at least one tree");
  RandomForest forest;
  forest.trees_ = std::move(trees);
  forest.num_classes_ = num_classes;
  return forest;
}

Matrix RandomForest::predict_proba(const Matrix& queries) const {
  const auto k = static_cast<std::size_t>(num_classes_);
  Matrix out(queries.rows(), k);
  const auto n_trees = static_cast<double>(trees_.size());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const auto row = queries.row(q);
    for (const auto& tree : trees_) {
      const auto leaf = tree.leaf_for(row, num_classes_);
      for (std::size_t c = 0; c < k; ++c) out(q, c) += leaf[c];
    }
    for (std::size_t c = 0; c < k; ++c) out(q, c) /= n_trees;
  }
  return out;
}

}  // namespace engage::classify
