// engage: command-line front end for the engagement-recognition pipeline.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "engage/annotation.hpp"
#include "engage/behavior.hpp"
#include "engage/classify.hpp"
#include "engage/contrastive.hpp"
#include "engage/csv.hpp"
#include "engage/error.hpp"
#include "engage/eval.hpp"
#include "engage/pipeline.hpp"
#include "engage/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitError = 2;
constexpr int kExitCheckFailed = 1;

// Raw command-line values; unset means "take the config file or default".
struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<int> hrv_window;
  std::optional<std::string> bf_sets;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> fold_mode;
  std::optional<bool> class_weighting;
  std::optional<bool> drop_implausible;
  std::optional<std::string> preset;
  std::optional<std::size_t> participants;
  std::optional<std::size_t> intervals;
  std::optional<std::size_t> trials;
  std::optional<std::string> model_file;
  std::optional<std::string> sweep_file;
  std::optional<std::string> windows;
  std::optional<std::string> models;
  std::optional<std::string> bf_combos;
};

// Fully resolved configuration: CLI flag > config file > default.
struct PipelineConfig {
  std::string command;
  std::string manifest;
  int hrv_window_s = 240;
  std::vector<engage::behavior::FeatureSet> bf_sets;
  engage::classify::ModelKind model = engage::classify::ModelKind::kKnnRf;
  std::uint64_t seed = 0;
  std::string out = "out";
  engage::eval::FoldMode fold_mode = engage::eval::FoldMode::kSampleLevel;
  bool class_weighting = false;
  bool drop_implausible = false;
  std::string preset = "easy";
  std::optional<std::size_t> participants;
  std::optional<std::size_t> intervals;
  std::size_t trials = 20;
  std::string model_file;
  std::string sweep_file;
  std::vector<int> windows{engage::annotation::kHrvWindows.begin(), engage::annotation::kHrvWindows.end()};
  std::vector<engage::classify::ModelKind> models{engage::classify::ModelKind::kKnn,
                                                   engage::classify::ModelKind::kKnnRf};
  std::vector<std::vector<engage::behavior::FeatureSet>> bf_combos{{}};
};

using engage::Error;
using engage::ErrorCode;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::vector<int> parse_windows(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    try {
      std::size_t used = 0;
      const int w = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(w);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "cannot parse window '" + item + "'");
    }
  }
  return out;
}

std::vector<std::vector<engage::behavior::FeatureSet>> parse_combos(const std::string& text) {
  std::vector<std::vector<engage::behavior::FeatureSet>> out;
  for (const auto& item : split(text, ';')) out.push_back(engage::behavior::parse_set_list(item));
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, path + ": config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
}

template <typename T>
std::optional<T> from_config(const json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg[key].is_null()) return std::nullopt;
  try {
    return cfg[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
T pick(const std::optional<T>& flag, const json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (auto v = from_config<T>(cfg, key)) return *v;
  return fallback;
}

// bf_sets may be given as "4,5" or [4, 5] in the config file.
std::optional<std::string> config_sets(const json& cfg) {
  if (!cfg.contains("bf_sets") || cfg["bf_sets"].is_null()) return std::nullopt;
  const auto& v = cfg["bf_sets"];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string text;
    for (const auto& id : v) {
      if (!id.is_number_integer()) throw Error(ErrorCode::kInvalidConfig, "bf_sets entries must be integers");
      if (!text.empty()) text.push_back(',');
      text += std::to_string(id.get<int>());
    }
    return text;
  }
  throw Error(ErrorCode::kInvalidConfig, "bf_sets must be a string or an array");
}

PipelineConfig resolve(const std::string& command, const Flags& f) {
  const json cfg = f.config ? load_config_file(*f.config) : json::object();
  PipelineConfig c;
  c.command = command;
  c.manifest = pick(f.manifest, cfg, "manifest", std::string());
  c.hrv_window_s = pick(f.hrv_window, cfg, "hrv_window", 240);
  const auto sets = f.bf_sets ? f.bf_sets : config_sets(cfg);
  if (sets) c.bf_sets = engage::behavior::parse_set_list(*sets);
  if (!c.bf_sets.empty()) engage::behavior::select_feature_sets(c.bf_sets);
  c.model = engage::classify::parse_model_kind(pick(f.model, cfg, "model", std::string("knn+rf")));
  c.seed = pick(f.seed, cfg, "seed", std::uint64_t{0});
  c.out = pick(f.out, cfg, "out", std::string("out"));
  const auto fold = pick(f.fold_mode, cfg, "fold_mode", std::string("sample"));
  if (fold == "sample") {
    c.fold_mode = engage::eval::FoldMode::kSampleLevel;
  } else if (fold == "subject") {
    c.fold_mode = engage::eval::FoldMode::kSubjectDisjoint;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "fold_mode must be 'sample' or 'subject'");
  }
  c.class_weighting = pick(f.class_weighting, cfg, "class_weighting", false);
  c.drop_implausible = pick(f.drop_implausible, cfg, "drop_implausible_ibis", false);
  c.preset = pick(f.preset, cfg, "preset", std::string("easy"));
  c.participants = f.participants ? f.participants : from_config<std::size_t>(cfg, "participants");
  c.intervals = f.intervals ? f.intervals : from_config<std::size_t>(cfg, "intervals");
  c.trials = pick(f.trials, cfg, "trials", std::size_t{20});
  c.model_file = pick(f.model_file, cfg, "model_file", std::string());
  c.sweep_file = pick(f.sweep_file, cfg, "sweep_file", std::string());
  if (auto w = f.windows ? f.windows : from_config<std::string>(cfg, "windows")) c.windows = parse_windows(*w);
  if (auto m = f.models ? f.models : from_config<std::string>(cfg, "models")) {
    c.models.clear();
    for (const auto& name : split(*m, ',')) c.models.push_back(engage::classify::parse_model_kind(name));
  }
  if (auto b = f.bf_combos ? f.bf_combos : from_config<std::string>(cfg, "bf_combos")) c.bf_combos = parse_combos(*b);

  if (!engage::annotation::is_valid_hrv_window(c.hrv_window_s)) {
    throw Error(ErrorCode::kInvalidWindow, "--hrv-window must be one of 60, 90, ..., 240; got " +
                                               std::to_string(c.hrv_window_s));
  }
  for (const int w : c.windows) {
    if (!engage::annotation::is_valid_hrv_window(w)) {
      throw Error(ErrorCode::kInvalidWindow, "sweep window " + std::to_string(w) + " is not one of 60, 90, ..., 240");
    }
  }
  for (const auto& combo : c.bf_combos) {
    if (!combo.empty()) engage::behavior::select_feature_sets(combo);
  }
  if (c.trials == 0) throw Error(ErrorCode::kInvalidConfig, "trials must be positive");
  return c;
}

json sets_json(const std::vector<engage::behavior::FeatureSet>& sets) {
  json arr = json::array();
  for (auto s : sets) arr.push_back(static_cast<int>(s));
  return arr;
}

json config_json(const PipelineConfig& c) {
  json j;
  j["command"] = c.command;
  j["manifest"] = c.manifest;
  j["hrv_window"] = c.hrv_window_s;
  j["bf_sets"] = sets_json(c.bf_sets);
  j["model"] = engage::classify::model_kind_name(c.model);
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["fold_mode"] = c.fold_mode == engage::eval::FoldMode::kSampleLevel ? "sample" : "subject";
  j["class_weighting"] = c.class_weighting;
  j["drop_implausible_ibis"] = c.drop_implausible;
  if (c.command == "synth") {
    j["preset"] = c.preset;
    j["participants"] = c.participants ? json(*c.participants) : json();
    j["intervals"] = c.intervals ? json(*c.intervals) : json();
  }
  if (c.command == "gradcheck") j["trials"] = c.trials;
  if (c.command == "evaluate") j["model_file"] = c.model_file;
  if (c.command == "report") j["sweep_file"] = c.sweep_file;
  if (c.command == "sweep") {
    json windows = json::array();
    for (const int w : c.windows) windows.push_back(w);
    j["windows"] = windows;
    json models = json::array();
    for (auto m : c.models) models.push_back(engage::classify::model_kind_name(m));
    j["models"] = models;
    json combos = json::array();
    for (const auto& combo : c.bf_combos) combos.push_back(sets_json(combo));
    j["bf_combos"] = combos;
  }
  return j;
}

// Records every file written so a failing run can remove its partial output.
class Outputs {
 public:
  explicit Outputs(const PipelineConfig& config) : config_(config_json(config)) {}

  void write(const fs::path& path, const std::string& text) {
    track(path);
    engage::csv::write_text_file(path, text);
    const fs::path sidecar = path.string() + ".config.json";
    track(sidecar);
    engage::csv::write_text_file(sidecar, config_.dump(2) + "\n");
  }

  void track(const fs::path& path) { written_.push_back(path); }

  void rollback() {
    std::error_code ec;
    for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove_all(*it, ec);
  }

 private:
  json config_;
  std::vector<fs::path> written_;
};

fs::path out_dir(const PipelineConfig& c) { return fs::path(c.out); }

void require_manifest(const PipelineConfig& c) {
  if (c.manifest.empty()) throw Error(ErrorCode::kInvalidConfig, "--manifest is required");
}

engage::pipeline::Corpus load_corpus(const PipelineConfig& c) {
  require_manifest(c);
  return engage::pipeline::Corpus::load(engage::pipeline::Manifest::load(c.manifest));
}

engage::pipeline::FeatureOptions feature_options(const PipelineConfig& c) {
  engage::pipeline::FeatureOptions o;
  o.hrv_window_s = c.hrv_window_s;
  o.bf_sets = c.bf_sets;
  o.ibi_policy.drop_implausible = c.drop_implausible;
  return o;
}

engage::eval::ExperimentOptions experiment_options(const PipelineConfig& c) {
  engage::eval::ExperimentOptions o;
  o.kind = c.model;
  o.seed = c.seed;
  o.fold_mode = c.fold_mode;
  o.class_weighting = c.class_weighting;
  return o;
}

int cmd_synth(const PipelineConfig& c, Outputs& outputs) {
  auto spec = engage::synth::preset(c.preset);
  spec.seed = c.seed;
  if (c.participants) spec.participants = *c.participants;
  if (c.intervals) spec.intervals_per_recording = *c.intervals;
  const fs::path dir = out_dir(c);
  if (!fs::exists(dir)) outputs.track(dir);
  const auto summary = engage::synth::synth_engagement_dataset(spec, dir);
  const fs::path sidecar = summary.manifest.string() + ".config.json";
  outputs.track(sidecar);
  engage::csv::write_text_file(sidecar, config_json(c).dump(2) + "\n");
  std::printf("synth: %zu recordings, intervals per class %zu/%zu/%zu -> %s\n", summary.recordings,
              summary.intervals_per_class[0], summary.intervals_per_class[1], summary.intervals_per_class[2],
              summary.manifest.string().c_str());
  return 0;
}

int cmd_gradcheck(const PipelineConfig& c, Outputs& outputs) {
  engage::contrastive::GradCheckOptions o;
  o.trials = c.trials;
  o.seed = c.seed;
  const auto report = engage::contrastive::gradient_check(o);
  const bool pass = report.max_rel_err < 1e-4;
  json j;
  j["trials"] = report.trials;
  j["entries"] = report.entries;
  j["max_rel_err"] = report.max_rel_err;
  j["tolerance"] = 1e-4;
  j["pass"] = pass;
  outputs.write(out_dir(c) / "gradcheck.json", j.dump(2) + "\n");
  std::printf("gradcheck: %zu trials, %zu entries, max relative error %.3e (%s)\n", report.trials, report.entries,
              report.max_rel_err, pass ? "pass" : "FAIL");
  return pass ? 0 : kExitCheckFailed;
}

int cmd_hrv_features(const PipelineConfig& c, Outputs& outputs) {
  auto options = feature_options(c);
  options.bf_sets.clear();
  const auto built = load_corpus(c).build(options);
  const fs::path path = out_dir(c) / "hrv_features.csv";
  outputs.track(path);
  outputs.track(path.string() + ".config.json");
  engage::pipeline::write_hrv_csv(path, built);
  engage::csv::write_text_file(path.string() + ".config.json", config_json(c).dump(2) + "\n");
  std::printf("hrv-features: %zu rows, %zu dropped -> %s\n", built.samples.size(), built.dropped.size(),
              path.string().c_str());
  return 0;
}

int cmd_windows(const PipelineConfig& c, Outputs& outputs) {
  const auto corpus = load_corpus(c);
  const auto result = corpus.windows(c.hrv_window_s);
  const fs::path path = out_dir(c) / "samples.csv";
  outputs.track(path);
  outputs.track(path.string() + ".config.json");
  engage::annotation::write_samples_report(path, result);
  engage::csv::write_text_file(path.string() + ".config.json", config_json(c).dump(2) + "\n");
  std::printf("windows: threshold %.6g, %zu kept, %zu dropped -> %s\n", corpus.threshold(), result.samples.size(),
              result.dropped.size(), path.string().c_str());
  return 0;
}

int cmd_train(const PipelineConfig& c, Outputs& outputs) {
  const auto built = load_corpus(c).build(feature_options(c));
  const auto result = engage::eval::run_experiment(built.dataset, experiment_options(c));
  outputs.write(out_dir(c) / "model.json", result.model.to_json() + "\n");
  const auto& best = result.cv.best_params();
  std::printf("train: %zu samples (%zu train), model %s, k %d, cv accuracy %.4f\n", built.dataset.size(),
              result.plan.train.size(), std::string(engage::classify::model_kind_name(best.kind)).c_str(), best.k,
              result.cv.mean_accuracy[result.cv.best]);
  return 0;
}

int cmd_evaluate(const PipelineConfig& c, Outputs& outputs) {
  const auto built = load_corpus(c).build(feature_options(c));
  engage::eval::MetricsReport metrics;
  if (!c.model_file.empty()) {
    const auto model = engage::classify::TrainedModel::load(c.model_file);
    if (model.feature_names() != built.dataset.feature_names) {
      throw Error(ErrorCode::kShape, "model features do not match the configured HRV/BF feature layout");
    }
    engage::eval::SplitOptions split;
    split.seed = c.seed;
    split.fold_mode = c.fold_mode;
    const auto plan = engage::eval::split_dataset(built.dataset.labels, built.dataset.participant_ids, split);
    const auto test = built.dataset.subset(plan.test);
    const auto prediction = model.predict(test.rows);
    metrics = engage::eval::compute_metrics(test.labels, prediction.classes, prediction.proba);
  } else {
    metrics = engage::eval::run_experiment(built.dataset, experiment_options(c)).test;
  }
  outputs.write(out_dir(c) / "metrics.json", engage::eval::metrics_json(metrics) + "\n");
  const fs::path confusion = out_dir(c) / "confusion.csv";
  outputs.track(confusion);
  outputs.track(confusion.string() + ".config.json");
  engage::eval::write_confusion_csv(confusion, metrics);
  engage::csv::write_text_file(confusion.string() + ".config.json", config_json(c).dump(2) + "\n");
  std::printf("evaluate: %zu test samples, accuracy %.4f, macro F1 %.4f, macro ROC AUC %s\n", metrics.samples,
              metrics.accuracy, metrics.macro_f1,
              metrics.macro_roc_auc ? std::to_string(*metrics.macro_roc_auc).c_str() : "undefined");
  return 0;
}

int cmd_sweep(const PipelineConfig& c, Outputs& outputs) {
  const auto corpus = load_corpus(c);
  engage::pipeline::SweepOptions o;
  o.windows = c.windows;
  o.models = c.models;
  o.bf_combinations = c.bf_combos;
  o.experiment = experiment_options(c);
  o.ibi_policy.drop_implausible = c.drop_implausible;
  const auto rows = engage::pipeline::run_sweep(corpus, o);
  outputs.write(out_dir(c) / "sweep.csv", engage::pipeline::sweep_csv(rows));
  std::printf("sweep: %zu rows -> %s\n", rows.size(), (out_dir(c) / "sweep.csv").string().c_str());
  return 0;
}

int cmd_report(const PipelineConfig& c, Outputs& outputs) {
  if (c.sweep_file.empty()) throw Error(ErrorCode::kInvalidConfig, "--sweep is required");
  const auto rows = engage::pipeline::parse_sweep_csv(c.sweep_file);
  const auto text = engage::pipeline::render_report(rows);
  outputs.write(out_dir(c) / "report.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (flags override it)");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--out", f.out, "Output directory");
}

void add_pipeline(CLI::App* sub, Flags& f) {
  sub->add_option("--manifest", f.manifest, "Dataset manifest JSON");
  sub->add_option("--hrv-window", f.hrv_window, "HRV window in seconds {60|90|120|150|180|210|240}");
  sub->add_option("--bf-sets", f.bf_sets, "Behavioural feature sets, e.g. 4,5 (empty or none = HRV only)");
  sub->add_option("--model", f.model, "knn | rf | knn+rf");
  sub->add_option("--fold-mode", f.fold_mode, "sample | subject");
  sub->add_option("--class-weighting", f.class_weighting, "Inverse-frequency class weights in the forest");
  sub->add_option("--drop-implausible-ibis", f.drop_implausible, "Drop intervals outside [300, 2000] ms");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"engage: physiological and behavioural engagement recognition"};
  app.require_subcommand(1);
  Flags flags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic engagement dataset");
  add_common(synth, flags);
  synth->add_option("--preset", flags.preset, "easy | fusion");
  synth->add_option("--participants", flags.participants, "Number of participants");
  synth->add_option("--intervals", flags.intervals, "5 s intervals per recording");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the contrastive loss gradient");
  add_common(gradcheck, flags);
  gradcheck->add_option("--trials", flags.trials, "Random trials");

  auto* hrv_features = app.add_subcommand("hrv-features", "Write per-sample HRV features");
  add_common(hrv_features, flags);
  add_pipeline(hrv_features, flags);

  auto* windows = app.add_subcommand("windows", "Write the observation-sample report");
  add_common(windows, flags);
  add_pipeline(windows, flags);

  auto* train = app.add_subcommand("train", "Fit and serialize a model");
  add_common(train, flags);
  add_pipeline(train, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on the held-out split");
  add_common(evaluate, flags);
  add_pipeline(evaluate, flags);
  evaluate->add_option("--model-file", flags.model_file, "Model from `train` (default: train in place)");

  auto* sweep = app.add_subcommand("sweep", "Windows x models x BF sets grid");
  add_common(sweep, flags);
  add_pipeline(sweep, flags);
  sweep->add_option("--windows", flags.windows, "Comma-separated windows (default all)");
  sweep->add_option("--models", flags.models, "Comma-separated models (default knn,knn+rf)");
  sweep->add_option("--bf-combos", flags.bf_combos, "Semicolon-separated BF set lists, e.g. 'none;4,5'");

  auto* report = app.add_subcommand("report", "Render a sweep CSV as plain-text tables");
  add_common(report, flags);
  report->add_option("--sweep", flags.sweep_file, "Sweep CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::cerr << "error: invalid-argument: " << e.what() << "\n";
    return kExitError;
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  std::optional<Outputs> outputs;
  try {
    const auto config = resolve(command, flags);
    outputs.emplace(config);
    if (command == "synth") return cmd_synth(config, *outputs);
    if (command == "gradcheck") return cmd_gradcheck(config, *outputs);
    if (command == "hrv-features") return cmd_hrv_features(config, *outputs);
    if (command == "windows") return cmd_windows(config, *outputs);
    if (command == "train") return cmd_train(config, *outputs);
    if (command == "evaluate") return cmd_evaluate(config, *outputs);
    if (command == "sweep") return cmd_sweep(config, *outputs);
    if (command == "report") return cmd_report(config, *outputs);
  } catch (const Error& e) {
    if (outputs) outputs->rollback();
    std::cerr << "error: " << engage::error_code_name(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    if (outputs) outputs->rollback();
    std::cerr << "error: internal: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
