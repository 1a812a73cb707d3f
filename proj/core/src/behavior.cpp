#include "engage/behavior.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <unordered_map>

#include "engage/csv.hpp"
#include "engage/error.hpp"

namespace engage::behavior {

namespace {

std::vector<std::string> build_set(FeatureSet set) {
  std::vector<std::string> out;
  switch (set) {
    case FeatureSet::kGazeVector:
      for (const char* eye : {"0", "1"}) {
        for (const char* axis : {"x", "y", "z"}) out.push_back(std::string("gaze_") + eye + "_" + axis);
      }
      break;
    case FeatureSet::kGazeAngle:
      out = {"gaze_angle_x", "gaze_angle_y"};
      break;
    case FeatureSet::kEyeLandmarks:
      for (const char* axis : {"x", "y", "X", "Y", "Z"}) {
        for (int i = 0; i < 56; ++i) out.push_back(std::string("eye_lmk_") + axis + "_" + std::to_string(i));
      }
      break;
    case FeatureSet::kHeadPose:
      out = {"pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"};
      break;
    case FeatureSet::kActionUnits:
      for (const char* suffix : {"_r", "_c"}) {
        for (auto id : kActionUnitIds) out.push_back("AU" + std::string(id) + suffix);
      }
      break;
  }
  return out;
}

struct Registry {
  std::array<std::vector<std::string>, 5> sets;
  std::array<std::size_t, 5> offsets{};
  std::vector<std::string> all;
  std::unordered_map<std::string, std::size_t> index;

  Registry() {
    for (std::size_t s = 0; s < sets.size(); ++s) {
      sets[s] = build_set(kAllFeatureSets[s]);
      offsets[s] = all.size();
      all.insert(all.end(), sets[s].begin(), sets[s].end());
    }
    for (std::size_t i = 0; i < all.size(); ++i) index.emplace(all[i], i);
  }
};

const Registry& registry() {
  static const Registry r;
  return r;
}

std::size_t slot(FeatureSet set) {
  const int id = static_cast<int>(set);
  if (id < 1 || id > 5) throw Error(ErrorCode::kInvalidSet, "unknown feature set " + std::to_string(id));
  return static_cast<std::size_t>(id - 1);
}

}  // namespace

const std::vector<std::string>& set_columns(FeatureSet set) { return registry().sets[slot(set)]; }

std::size_t set_size(FeatureSet set) { return set_columns(set).size(); }

const std::vector<std::string>& registered_columns() { return registry().all; }

FeatureSet parse_set_id(int id) {
  if (id < 1 || id > 5) throw Error(ErrorCode::kInvalidSet, "unknown feature set " + std::to_string(id));
  return static_cast<FeatureSet>(id);
}

std::vector<FeatureSet> parse_set_list(std::string_view text) {
  std::vector<FeatureSet> out;
  if (text.empty() || text == "none") return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    auto token = text.substr(pos, comma - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    int id = 0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
    if (token.empty() || ec != std::errc() || end != token.data() + token.size()) {
      throw Error(ErrorCode::kInvalidSet, "cannot parse feature set '" + std::string(token) + "'");
    }
    out.push_back(parse_set_id(id));
    pos = comma + 1;
  }
  return out;
}

std::string format_set_list(std::span<const FeatureSet> sets) {
  if (sets.empty()) return "none";
  std::string out;
  for (auto s : sets) {
    if (!out.empty()) out.push_back('+');
    out += std::to_string(static_cast<int>(s));
  }
  return out;
}

BehaviorTable BehaviorTable::load(const std::filesystem::path& path, std::optional<double> fps) {
  const auto table = csv::read(path);
  const auto& names = registered_columns();
  std::vector<std::size_t> source(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto col = table.find(names[i]);
    if (!col) throw Error(ErrorCode::kSchema, path.string() + ": missing column " + names[i]);
    source[i] = *col;
  }
  const auto time_col = table.find("timestamp");
  if (!time_col && !(fps && *fps > 0.0)) {
    throw Error(ErrorCode::kSchema, path.string() + ": missing column timestamp and no fps to derive it");
  }
  const auto conf_col = table.find("confidence");

  const std::size_t n = table.rows.size();
  std::vector<double> times(n);
  std::vector<bool> tracked(n, true);
  Matrix values(n, names.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cells = table.rows[r];
    times[r] = time_col ? csv::parse_double(cells[*time_col], r + 1, "timestamp")
                        : static_cast<double>(r) / *fps;
    if (conf_col) tracked[r] = csv::parse_double(cells[*conf_col], r + 1, "confidence") >= kMinTrackingConfidence;
    for (std::size_t c = 0; c < names.size(); ++c) {
      values(r, c) = csv::parse_double(cells[source[c]], r + 1, names[c]);
    }
  }
  return from_columns(std::move(times), std::move(values), std::move(tracked));
}

BehaviorTable BehaviorTable::from_columns(std::vector<double> timestamps, Matrix features,
                                          std::vector<bool> tracked) {
  const std::size_t n = timestamps.size();
  if (features.rows() != n || (n > 0 && features.cols() != registered_columns().size())) {
    throw Error(ErrorCode::kShape, "behaviour matrix must be frames x " + std::to_string(registered_columns().size()));
  }
  if (tracked.empty()) tracked.assign(n, true);
  if (tracked.size() != n) throw Error(ErrorCode::kShape, "tracking flags differ in length from timestamps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });

  BehaviorTable out;
  out.timestamps_.resize(n);
  out.tracked_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.timestamps_[i] = timestamps[order[i]];
    out.tracked_[i] = tracked[order[i]];
  }
  out.features_ = n > 0 ? features.select_rows(order) : Matrix(0, registered_columns().size());
  return out;
}

std::size_t BehaviorTable::column_index(std::string_view name) const {
  const auto& index = registry().index;
  const auto it = index.find(std::string(name));
  if (it == index.end()) throw Error(ErrorCode::kSchema, "unregistered column " + std::string(name));
  return it->second;
}

FeatureSelection select_feature_sets(std::span<const FeatureSet> sets) {
  if (sets.empty()) throw Error(ErrorCode::kInvalidSet, "feature set list is empty");
  std::array<bool, 5> wanted{};
  for (auto s : sets) {
    const auto k = slot(s);
    if (wanted[k]) throw Error(ErrorCode::kInvalidSet, "feature set " + std::to_string(k + 1) + " listed twice");
    wanted[k] = true;
  }
  const auto& reg = registry();
  FeatureSelection out;
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    if (!wanted[k]) continue;
    for (std::size_t i = 0; i < reg.sets[k].size(); ++i) {
      out.columns.push_back(reg.offsets[k] + i);
      out.names.push_back(reg.sets[k][i]);
    }
  }
  return out;
}

std::optional<std::vector<double>> window_average(const BehaviorTable& table, const FeatureSelection& selection,
                                                  double center_s, double width_s) {
  if (!(width_s > 0.0)) throw Error(ErrorCode::kInvalidWindow, "window width must be positive");
  const double lo = center_s - 0.5 * width_s;
  const double hi = center_s + 0.5 * width_s;
  const auto& ts = table.timestamps();
  const auto first = std::lower_bound(ts.begin(), ts.end(), lo);
  const auto last = std::upper_bound(first, ts.end(), hi);

  std::vector<double> sums(selection.size(), 0.0);
  std::size_t count = 0;
  for (auto it = first; it != last; ++it) {
    const auto f = static_cast<std::size_t>(it - ts.begin());
    if (!table.tracked(f)) continue;
    const auto row = table.features().row(f);
    for (std::size_t c = 0; c < selection.size(); ++c) sums[c] += row[selection.columns[c]];
    ++count;
  }
  if (count == 0) return std::nullopt;
  for (auto& s : sums) s /= static_cast<double>(count);
  return sums;
}

void write_behavior_csv(const std::filesystem::path& path, const BehaviorTable& table, int significant_digits) {
  const auto& names = registered_columns();
  std::string text = "frame,timestamp,confidence,success";
  for (const auto& name : names) {
    text.push_back(',');
    text += name;
  }
  text.push_back('\n');
  for (std::size_t f = 0; f < table.frames(); ++f) {
    text += std::to_string(f + 1);
    text.push_back(',');
    text += csv::format_double(table.timestamps()[f], 8);
    text += table.tracked(f) ? ",0.98,1" : ",0.2,0";
    for (const double v : table.features().row(f)) {
      text.push_back(',');
      text += csv::format_double(v, significant_digits);
    }
    text.push_back('\n');
  }
  csv::write_text_file(path, text);
}

}  // namespace engage::behavior
