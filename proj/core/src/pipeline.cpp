#include "engage/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "engage/csv.hpp"
#include "engage/error.hpp"
#include "engage/signal.hpp"

namespace engage::pipeline {

namespace {

using annotation::TimeSpan;

TimeSpan hull(const TimeSpan& a, const TimeSpan& b) { return {std::min(a.begin, b.begin), std::max(a.end, b.end)}; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string required_string(const nlohmann::json& entry, const char* key, std::size_t index) {
  if (!entry.contains(key) || !entry[key].is_string()) {
    throw Error(ErrorCode::kSchema, "manifest recording " + std::to_string(index) + " lacks string field '" + key + "'");
  }
  return entry[key].get<std::string>();
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("recordings") || !doc["recordings"].is_array()) {
    throw Error(ErrorCode::kSchema, path.string() + ": expected an object with a 'recordings' array");
  }
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path rel(p);
    return rel.is_absolute() ? rel : base / rel;
  };
  Manifest m;
  std::size_t index = 0;
  for (const auto& entry : doc["recordings"]) {
    RecordingEntry r;
    r.id = required_string(entry, "id", index);
    r.participant = required_string(entry, "participant", index);
    r.ppg_csv = resolve(required_string(entry, "ppg_csv", index));
    r.engagement_csv = resolve(required_string(entry, "engagement_csv", index));
    if (entry.contains("behavior_csv") && !entry["behavior_csv"].is_null()) {
      r.behavior_csv = resolve(required_string(entry, "behavior_csv", index));
    }
    if (entry.contains("fps") && !entry["fps"].is_null()) {
      if (!entry["fps"].is_number() || !(entry["fps"].get<double>() > 0.0)) {
        throw Error(ErrorCode::kSchema, "manifest recording " + r.id + ": fps must be a positive number");
      }
      r.fps = entry["fps"].get<double>();
    }
    m.recordings.push_back(std::move(r));
    ++index;
  }
  if (m.recordings.empty()) throw Error(ErrorCode::kEmptyInput, path.string() + ": manifest lists no recordings");
  return m;
}

Corpus Corpus::load(const Manifest& manifest, const hrv::PeakDetectorOptions& peaks) {
  Corpus corpus;
  std::vector<double> stds;
  for (const auto& entry : manifest.recordings) {
    LoadedRecording rec;
    rec.entry = entry;
    const auto ppg = signal::read_signal_csv(entry.ppg_csv);
    rec.peaks = hrv::detect_peaks(ppg, peaks);
    rec.signal_bounds = {ppg.t0, ppg.t0 + ppg.duration()};

    const auto track = annotation::read_engagement_csv(entry.engagement_csv);
    rec.intervals = annotation::interval_stats(track);
    const double period = track.timestamps.size() > 1 ? track.timestamps[1] - track.timestamps[0] : 0.0;
    rec.recording_bounds = hull(rec.signal_bounds, {track.timestamps.front(), track.timestamps.back() + period});

    if (entry.behavior_csv) {
      rec.behavior = behavior::BehaviorTable::load(*entry.behavior_csv, entry.fps);
      const auto& ts = rec.behavior->timestamps();
      if (!ts.empty()) rec.recording_bounds = hull(rec.recording_bounds, {ts.front(), ts.back()});
    }
    for (const auto& s : rec.intervals) stds.push_back(s.stddev);
    corpus.recordings_.push_back(std::move(rec));
  }
  corpus.threshold_ = annotation::compute_median_threshold(stds);
  return corpus;
}

annotation::WindowingResult Corpus::windows(int hrv_window_s) const {
  annotation::WindowingResult all;
  for (const auto& rec : recordings_) {
    const auto labeled = annotation::filter_and_label(rec.intervals, threshold_);
    auto part = annotation::build_observation_samples(
        labeled, hrv_window_s, {rec.entry.id, rec.entry.participant, rec.recording_bounds, rec.signal_bounds});
    std::move(part.samples.begin(), part.samples.end(), std::back_inserter(all.samples));
    std::move(part.dropped.begin(), part.dropped.end(), std::back_inserter(all.dropped));
  }
  return all;
}

BuiltDataset Corpus::build(const FeatureOptions& options) const {
  std::optional<behavior::FeatureSelection> selection;
  if (!options.bf_sets.empty()) {
    selection = behavior::select_feature_sets(options.bf_sets);
    for (const auto& rec : recordings_) {
      if (!rec.behavior) {
        throw Error(ErrorCode::kInvalidConfig, "behavioural sets requested but recording " + rec.entry.id +
                                                   " has no behavior_csv");
      }
    }
  }
  std::map<std::string, const LoadedRecording*> by_id;
  for (const auto& rec : recordings_) by_id[rec.entry.id] = &rec;

  const auto& hrv_names = hrv::HrvFeatureVector::names();
  static const std::vector<std::string> kNoNames;
  BuiltDataset out;
  out.dataset.feature_names = classify::fuse_names(hrv_names, selection ? selection->names : kNoNames);
  const std::size_t expected_bf = selection ? selection->size() : 0;
  out.dataset.rows = Matrix(0, hrv::kFeatureCount + expected_bf);

  auto windowed = windows(options.hrv_window_s);
  out.dropped = std::move(windowed.dropped);
  for (auto& sample : windowed.samples) {
    const auto& rec = *by_id.at(sample.recording_id);
    std::string reason;
    std::vector<double> row;
    try {
      auto ibi = hrv::ibis_in_span(rec.peaks, sample.hrv_span.begin, sample.hrv_span.end);
      ibi = hrv::apply_policy(ibi, options.ibi_policy);
      const auto features = hrv::hrv_all(ibi);
      std::vector<double> bf;
      if (selection) {
        const double center = 0.5 * (sample.bf_span.begin + sample.bf_span.end);
        auto averaged = behavior::window_average(*rec.behavior, *selection, center, sample.bf_span.width());
        if (!averaged) {
          reason = "empty behaviour window";
        } else {
          bf = std::move(*averaged);
        }
      }
      if (reason.empty()) {
        row = classify::fuse(features.values, bf, expected_bf);
        if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
          reason = "non-finite feature";
        }
      }
    } catch (const Error& e) {
      reason = "hrv " + std::string(error_code_name(e.code())) + ": " + e.what();
    }
    if (!reason.empty()) {
      out.dropped.push_back({std::move(sample), std::move(reason)});
      continue;
    }
    out.dataset.rows.append_row(row);
    out.dataset.labels.push_back(static_cast<int>(sample.label));
    out.dataset.participant_ids.push_back(sample.participant_id);
    out.samples.push_back(std::move(sample));
  }
  return out;
}

void write_hrv_csv(const std::filesystem::path& path, const BuiltDataset& built) {
  std::vector<std::string> header{"recording_id", "participant_id", "center_s", "label"};
  for (const auto name : hrv::HrvFeatureVector::names()) header.emplace_back(name);
  std::string text = csv::join(header) + "\n";
  for (std::size_t i = 0; i < built.samples.size(); ++i) {
    const auto& s = built.samples[i];
    std::vector<std::string> cells{s.recording_id, s.participant_id, csv::format_double(s.center_s),
                                   std::string(annotation::class_name(s.label))};
    const auto row = built.dataset.rows.row(i);
    for (std::size_t c = 0; c < hrv::kFeatureCount; ++c) cells.push_back(csv::format_double(row[c]));
    text += csv::join(cells) + "\n";
  }
  csv::write_text_file(path, text);
}

std::vector<SweepRow> run_sweep(const Corpus& corpus, const SweepOptions& options) {
  std::vector<SweepRow> rows;
  for (const int window : options.windows) {
    for (const auto& sets : options.bf_combinations) {
      FeatureOptions features;
      features.hrv_window_s = window;
      features.bf_sets = sets;
      features.ibi_policy = options.ibi_policy;
      const auto built = corpus.build(features);
      for (const auto kind : options.models) {
        auto experiment = options.experiment;
        experiment.kind = kind;
        const auto result = eval::run_experiment(built.dataset, experiment);
        rows.push_back({window, std::string(classify::model_kind_name(kind)), behavior::format_set_list(sets),
                        result.test.accuracy, result.test.macro_roc_auc, result.test.macro_f1});
      }
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string text = "window_s,model,bf_sets,accuracy,roc_auc,macro_f1\n";
  for (const auto& r : rows) {
    text += csv::join({std::to_string(r.window_s), r.model, r.bf_sets, csv::format_double(r.accuracy),
                       r.roc_auc ? csv::format_double(*r.roc_auc) : std::string("nan"),
                       csv::format_double(r.macro_f1)});
    text.push_back('\n');
  }
  return text;
}

std::vector<SweepRow> parse_sweep_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto c_window = table.require("window_s");
  const auto c_model = table.require("model");
  const auto c_sets = table.require("bf_sets");
  const auto c_acc = table.require("accuracy");
  const auto c_auc = table.require("roc_auc");
  const auto c_f1 = table.require("macro_f1");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cells = table.rows[i];
    SweepRow r;
    r.window_s = static_cast<int>(csv::parse_double(cells[c_window], i + 1, "window_s"));
    r.model = cells[c_model];
    r.bf_sets = cells[c_sets];
    r.accuracy = csv::parse_double(cells[c_acc], i + 1, "accuracy");
    if (cells[c_auc] != "nan") r.roc_auc = csv::parse_double(cells[c_auc], i + 1, "roc_auc");
    r.macro_f1 = csv::parse_double(cells[c_f1], i + 1, "macro_f1");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_report(std::span<const SweepRow> rows) {
  std::vector<int> windows;
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::tuple<std::string, std::string, int>, const SweepRow*> cells;
  for (const auto& r : rows) {
    if (std::find(windows.begin(), windows.end(), r.window_s) == windows.end()) windows.push_back(r.window_s);
    const auto key = std::make_pair(r.model, r.bf_sets);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    cells[{r.model, r.bf_sets, r.window_s}] = &r;
  }
  std::sort(windows.begin(), windows.end());

  auto fmt = [](std::optional<double> v) {
    if (!v) return std::string("     -");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6.3f", *v);
    return std::string(buf);
  };
  std::string out;
  for (const auto* metric : {"accuracy", "roc_auc", "macro_f1"}) {
    out += std::string(metric) + "\n";
    char head[64];
    std::snprintf(head, sizeof head, "%-8s %-8s", "model", "bf_sets");
    out += head;
    for (const int w : windows) {
      std::snprintf(head, sizeof head, " %5ds", w);
      out += head;
    }
    out += "\n";
    for (const auto& [model, sets] : keys) {
      char label[64];
      std::snprintf(label, sizeof label, "%-8s %-8s", model.c_str(), sets.c_str());
      out += label;
      for (const int w : windows) {
        const auto it = cells.find({model, sets, w});
        std::optional<double> v;
        if (it != cells.end()) {
          const auto& r = *it->second;
          const std::string_view m(metric);
          v = m == "accuracy" ? std::optional<double>(r.accuracy) : m == "roc_auc" ? r.roc_auc : r.macro_f1;
        }
        out += " " + fmt(v);
      }
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace engage::pipeline
