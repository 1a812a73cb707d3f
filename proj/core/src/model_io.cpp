#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "engage/classify.hpp"
#include "engage/csv.hpp"
#include "engage/error.hpp"

namespace engage::classify {

namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "engage-model";
constexpr int kVersion = 1;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  Matrix m;
  for (const auto& row : rows) m.append_row(row.get<std::vector<double>>());
  return m;
}

}  // namespace

struct ModelCodec {
  static json encode(const TrainedModel& m) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = model_kind_name(m.params_.kind);
    j["num_classes"] = m.num_classes_;
    j["k"] = m.params_.k;
    j["forest_options"] = {{"n_trees", m.params_.forest.n_trees},
                           {"seed", m.params_.forest.seed},
                           {"class_weighting", m.params_.forest.class_weighting}};
    j["feature_names"] = m.feature_names_;
    j["standardizer"] = {{"mean", m.standardizer_.mean}, {"std", m.standardizer_.std}};
    if (m.knn_) {
      j["knn"] = {{"rows", matrix_to_json(m.knn_->rows())}, {"labels", m.knn_->labels()}};
    }
    if (m.forest_) {
      json trees = json::array();
      for (const auto& t : m.forest_->trees()) {
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"value_offset", t.value_offset},
                         {"values", t.values}});
      }
      j["trees"] = std::move(trees);
    }
    return j;
  }

  static TrainedModel decode(const json& j) {
    if (j.value("format", "") != kFormat) throw Error(ErrorCode::kSchema, "not a serialized model");
    if (j.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::kSchema, "unsupported model version " + j.at("version").dump());
    }
    TrainedModel m;
    m.params_.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.num_classes_ = j.at("num_classes").get<int>();
    m.params_.k = j.at("k").get<int>();
    const auto& fo = j.at("forest_options");
    m.params_.forest.n_trees = fo.at("n_trees").get<int>();
    m.params_.forest.seed = fo.at("seed").get<std::uint64_t>();
    m.params_.forest.class_weighting = fo.at("class_weighting").get<bool>();
    m.feature_names_ = j.at("feature_names").get<std::vector<std::string>>();
    m.standardizer_.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer_.std = j.at("standardizer").at("std").get<std::vector<double>>();
    if (m.standardizer_.mean.size() != m.standardizer_.std.size()) {
      throw Error(ErrorCode::kSchema, "standardizer mean and std differ in length");
    }
    if (m.params_.kind != ModelKind::kRf) {
      const auto& knn = j.at("knn");
      m.knn_ = KnnModel::fit(matrix_from_json(knn.at("rows")), knn.at("labels").get<std::vector<int>>(),
                             m.params_.k, m.num_classes_);
    }
    if (m.params_.kind != ModelKind::kKnn) {
      std::vector<DecisionTree> trees;
      for (const auto& t : j.at("trees")) {
        DecisionTree tree;
        tree.feature = t.at("feature").get<std::vector<int>>();
        tree.threshold = t.at("threshold").get<std::vector<double>>();
        tree.left = t.at("left").get<std::vector<int>>();
        tree.right = t.at("right").get<std::vector<int>>();
        tree.value_offset = t.at("value_offset").get<std::vector<int>>();
        tree.values = t.at("values").get<std::vector<double>>();
        const auto n = tree.feature.size();
        if (n == 0 || tree.threshold.size() != n || tree.left.size() != n || tree.right.size() != n ||
            tree.value_offset.size() != n) {
          throw Error(ErrorCode::kSchema, "malformed tree arrays");
        }
        trees.push_back(std::move(tree));
      }
      m.forest_ = RandomForest::from_trees(std::move(trees), m.num_classes_);
    }
    return m;
  }
};

std::string TrainedModel::to_json() const { return ModelCodec::encode(*this).dump(1); }

TrainedModel TrainedModel::from_json(std::string_view text) {
  try {
    return ModelCodec::decode(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("model file: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const { csv::write_text_file(path, to_json() + "\n"); }

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

}  // namespace engage::classify
