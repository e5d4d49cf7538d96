// Copyright 2026 The lungscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lungscope/pipeline.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "lungscope/csv.hpp"
#include "lungscope/explain.hpp"
#include "lungscope/image_io.hpp"
#include "lungscope/render.hpp"
#include "lungscope/segmentation.hpp"

namespace lungscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class FieldErrors {
 public:
  void add(const std::string& field, const std::string& message) { errors_.push_back(field + ": " + message); }
  template <typename F>
  void guard(const std::string& field, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      add(field, e.detail());
    } catch (const json::exception& e) {
      add(field, e.what());
    }
  }
  void raise_if_any() const {
    if (errors_.empty()) return;
    std::string msg = "invalid configuration";
    for (const auto& e : errors_) msg += "\n  " + e;
    throw Error(ErrorKind::kInvalidConfig, msg);
  }

 private:
  std::vector<std::string> errors_;
};

std::vector<std::string> known_keys() {
  return {"seed",    "data",         "output",   "sample",        "split",         "enhancement",
          "segmentation", "architectures", "width", "pretrained", "pretrained_dir", "train",
          "explain", "overlay_alpha", "sweep"};
}

json enhancement_json(const EnhancementConfig& e) {
  return {{"method", to_string(e.method)},
          {"clahe_clip", e.clahe_clip},
          {"clahe_tiles", {e.clahe_tile_rows, e.clahe_tile_cols}},
          {"unsharp_sigma", e.unsharp_sigma},
          {"unsharp_amount", e.unsharp_amount},
          {"laplacian_amount", e.laplacian_amount},
          {"butterworth_order", e.butterworth_order},
          {"butterworth_cutoff", e.butterworth_cutoff}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig cfg;
  FieldErrors errors;
  if (!j.is_object()) throw Error(ErrorKind::kInvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) errors.add(key, "unknown field");
  }
  if (!j.contains("seed")) {
    errors.add("seed", "required (runs never fall back to a clock-derived seed)");
  } else {
    errors.guard("seed", [&] { cfg.seed = j.at("seed").get<std::uint64_t>(); });
  }
  errors.guard("data", [&] { cfg.data = j.value("data", std::string()); });
  errors.guard("output", [&] { cfg.output = j.value("output", std::string()); });
  if (j.contains("sample")) {
    errors.guard("sample", [&] {
      cfg.sample = SampleCounts{j.at("sample").at("positives").get<std::size_t>(),
                                j.at("sample").at("negatives").get<std::size_t>()};
    });
  }
  if (j.contains("split")) {
    errors.guard("split", [&] {
      const auto& s = j.at("split");
      cfg.split.train = s.value("train", cfg.split.train);
      cfg.split.val = s.value("val", cfg.split.val);
      cfg.split.test = s.value("test", cfg.split.test);
    });
  }
  if (j.contains("enhancement")) {
    errors.guard("enhancement", [&] {
      const auto& e = j.at("enhancement");
      auto& ec = cfg.enhancement;
      if (e.contains("method")) ec.method = parse_enhancement_method(e.at("method").get<std::string>());
      ec.clahe_clip = e.value("clahe_clip", ec.clahe_clip);
      if (e.contains("clahe_tiles")) {
        ec.clahe_tile_rows = e.at("clahe_tiles").at(0).get<int>();
        ec.clahe_tile_cols = e.at("clahe_tiles").at(1).get<int>();
      }
      ec.unsharp_sigma = e.value("unsharp_sigma", ec.unsharp_sigma);
      ec.unsharp_amount = e.value("unsharp_amount", ec.unsharp_amount);
      ec.laplacian_amount = e.value("laplacian_amount", ec.laplacian_amount);
      ec.butterworth_order = e.value("butterworth_order", ec.butterworth_order);
      ec.butterworth_cutoff = e.value("butterworth_cutoff", ec.butterworth_cutoff);
    });
  }
  if (j.contains("segmentation")) {
    errors.guard("segmentation", [&] {
      const auto& s = j.at("segmentation");
      cfg.segmentation = s.value("enabled", cfg.segmentation);
      cfg.segmentation_weights = s.value("weights", std::string());
      cfg.binarize.threshold = s.value("threshold", cfg.binarize.threshold);
      cfg.binarize.keep_two_largest = s.value("keep_two_largest", cfg.binarize.keep_two_largest);
    });
  }
  if (j.contains("architectures")) {
    errors.guard("architectures", [&] {
      cfg.architectures.clear();
      for (const auto& a : j.at("architectures")) cfg.architectures.push_back(parse_architecture(a.get<std::string>()));
    });
  }
  errors.guard("width", [&] { cfg.width = j.value("width", cfg.width); });
  errors.guard("pretrained", [&] { cfg.pretrained = j.value("pretrained", cfg.pretrained); });
  errors.guard("pretrained_dir", [&] { cfg.pretrained_dir = j.value("pretrained_dir", std::string()); });
  if (j.contains("train")) {
    errors.guard("train", [&] {
      const auto& t = j.at("train");
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      if (t.contains("optimizer") && t.at("optimizer").get<std::string>() != "adam") {
        throw Error(ErrorKind::kInvalidConfig, "only the adam optimizer is supported");
      }
    });
  }
  errors.guard("explain", [&] { cfg.explain = j.value("explain", cfg.explain); });
  errors.guard("overlay_alpha", [&] { cfg.overlay_alpha = j.value("overlay_alpha", cfg.overlay_alpha); });
  if (j.contains("sweep")) {
    errors.guard("sweep", [&] {
      const auto& s = j.at("sweep");
      SweepConfig sc;
      sc.step = s.value("step", sc.step);
      sc.total = s.value("total", sc.total);
      sc.per_op_per_class = s.value("per_op_per_class", sc.per_op_per_class);
      sc.contrast_factor = s.value("contrast_factor", sc.contrast_factor);
      sc.crop_fraction = s.value("crop_fraction", sc.crop_fraction);
      if (s.contains("ops")) {
        // Only validates names; the sweep always uses all four operations.
        for (const auto& op : s.at("ops")) parse_augmentation_kind(op.get<std::string>());
      }
      cfg.sweep = sc;
    });
  }
  errors.raise_if_any();
  return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInvalidConfig, "cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, path.string() + ": " + e.what());
  }
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json archs = json::array();
  for (auto a : architectures) archs.push_back(to_string(a));
  json j = {{"data", data.generic_string()},
            {"output", output.generic_string()},
            {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
            {"enhancement", enhancement_json(enhancement)},
            {"segmentation",
             {{"enabled", segmentation},
              {"weights", segmentation_weights.generic_string()},
              {"threshold", binarize.threshold},
              {"keep_two_largest", binarize.keep_two_largest}}},
            {"architectures", archs},
            {"width", width},
            {"pretrained", pretrained},
            {"pretrained_dir", pretrained_dir.generic_string()},
            {"train",
             {{"batch_size", train.batch_size},
              {"epochs", train.epochs},
              {"learning_rate", train.learning_rate},
              {"optimizer", "adam"}}},
            {"explain", explain},
            {"overlay_alpha", overlay_alpha}};
  if (seed) j["seed"] = *seed;
  if (sample) j["sample"] = {{"positives", sample->positives}, {"negatives", sample->negatives}};
  if (sweep) {
    j["sweep"] = {{"step", sweep->step},
                  {"total", sweep->total},
                  {"per_op_per_class", sweep->per_op_per_class},
                  {"contrast_factor", sweep->contrast_factor},
                  {"crop_fraction", sweep->crop_fraction}};
  }
  return j;
}

void PipelineConfig::validate() const {
  FieldErrors errors;
  if (!seed) errors.add("seed", "required");
  if (data.empty()) {
    errors.add("data", "required");
  } else if (!fs::is_directory(data)) {
    errors.add("data", "directory " + data.string() + " does not exist");
  }
  if (output.empty()) errors.add("output", "required");
  errors.guard("split", [&] { split.validate(); });
  errors.guard("enhancement", [&] { enhancement.validate(); });
  if (segmentation) {
    if (segmentation_weights.empty()) {
      errors.add("segmentation.weights", "required when segmentation is enabled");
    } else if (!fs::is_regular_file(segmentation_weights)) {
      errors.add("segmentation.weights", "file " + segmentation_weights.string() + " does not exist");
    }
  }
  if (!(binarize.threshold > 0.0 && binarize.threshold < 1.0)) {
    errors.add("segmentation.threshold", "must lie in (0, 1)");
  }
  if (architectures.empty()) errors.add("architectures", "at least one architecture is required");
  if (!(width > 0.0)) errors.add("width", "must be positive");
  if (pretrained && !pretrained_dir.empty() && !fs::is_directory(pretrained_dir)) {
    errors.add("pretrained_dir", "directory " + pretrained_dir.string() + " does not exist");
  }
  errors.guard("train", [&] { train.validate(); });
  if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0)) errors.add("overlay_alpha", "must lie in [0, 1]");
  if (sweep) errors.guard("sweep", [&] { sweep->validate(); });
  errors.raise_if_any();
}

ArchitectureSpec PipelineConfig::spec_for(Architecture arch) const {
  ArchitectureSpec spec = ArchitectureSpec::of(arch, seed.value_or(0), width);
  spec.pretrained = pretrained;
  if (pretrained && !pretrained_dir.empty()) spec.pretrained_weights = pretrained_dir / (std::string(to_string(arch)) + ".ckpt");
  return spec;
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::string text = cfg.to_json().dump();
  return hex64(fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}));
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kInvalidSplit: return 2;
    case ErrorKind::kDataLeak: return 3;
    case ErrorKind::kDivergence: return 4;
    default: return 1;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kInvalidLayout, "directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& item : fs::recursive_directory_iterator(dir)) {
    if (item.is_regular_file() && looks_like_image(item.path())) out.push_back(item.path());
  }
  std::sort(out.begin(), out.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, dir).generic_string() < fs::relative(b, dir).generic_string();
  });
  return out;
}

std::string predictions_csv(const std::vector<PredictionRecord>& records) {
  std::string out = "source_id,true_label,predicted_label,p_covid,p_normal\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{:.6f},{:.6f}\n", csv::escape(r.source_id),
                       r.truth ? std::string(to_string(*r.truth)) : std::string(), to_string(r.prediction.label),
                       r.prediction.probabilities[0], r.prediction.probabilities[1]);
  }
  return out;
}

std::vector<PredictionRecord> read_predictions_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = csv::split(line);
  if (header.size() < 3 || header[0] != "source_id" || header[1] != "true_label" || header[2] != "predicted_label") {
    throw Error(ErrorKind::kInvalidData, path.string() + " lacks the source_id,true_label,predicted_label header");
  }
  std::vector<PredictionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() < 3) throw Error(ErrorKind::kInvalidData, "malformed predictions row: " + line);
    PredictionRecord r;
    r.source_id = f[0];
    if (!f[1].empty()) r.truth = parse_label(f[1]);
    r.prediction.label = parse_label(f[2]);
    if (f.size() >= 5) r.prediction.probabilities = {std::stod(f[3]), std::stod(f[4])};
    out.push_back(std::move(r));
  }
  return out;
}

PreparedData prepare_data(const PipelineConfig& cfg) {
  PreparedData data;
  const std::uint64_t seed = cfg.seed.value();
  const DatasetManifest full = load_manifest(cfg.data);
  data.manifest = cfg.sample ? balanced_sample(full, cfg.sample->positives, cfg.sample->negatives, seed) : full;

  std::optional<SegmentationModel> seg;
  if (cfg.segmentation) seg.emplace(SegmentationModel::load(cfg.segmentation_weights));
  PreprocessOptions options;
  options.enhancement = cfg.enhancement;
  options.segmentation = seg ? &*seg : nullptr;
  options.binarize = cfg.binarize;
  options.cache_dir = cache_dir_from_env();
  PreprocessResult pre = preprocess_all(data.manifest, options);
  data.failures = pre.failures;

  // Split over the images that survived preprocessing.
  DatasetManifest kept;
  kept.root = data.manifest.root;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pre.images.size(); ++i) index[pre.images[i].source_id] = i;
  for (const auto& e : data.manifest.entries) {
    if (index.count(e.source_id) != 0) kept.entries.push_back(e);
  }
  data.assignment = split_dataset(kept, cfg.split, seed);
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<LabeledImage> out;
    for (const auto& id : ids) out.push_back(pre.images[index.at(id)]);
    return out;
  };
  data.splits.train = gather(data.assignment.train);
  data.splits.val = gather(data.assignment.val);
  data.splits.test = gather(data.assignment.test);
  if (!pre.masks.empty()) {
    for (std::size_t i = 0; i < pre.images.size(); ++i) data.masks.emplace(pre.images[i].source_id, pre.masks[i]);
  }
  return data;
}

namespace {

std::vector<LabeledImage> fit(const std::vector<LabeledImage>& set, int size) {
  std::vector<LabeledImage> out = set;
  for (auto& img : out) img.image = resize(img.image, size, size);
  return out;
}

std::string stem_of(const std::string& source_id) {
  fs::path p(source_id);
  p.replace_extension();
  return p.generic_string();
}

json explain_record(const Explanation& ex, const std::optional<double>& relevance) {
  json j = {{"predicted_label", to_string(ex.prediction.label)},
            {"p_covid", round_to(ex.prediction.probabilities[0], 6)},
            {"p_normal", round_to(ex.prediction.probabilities[1], 6)},
            {"heatmap_target", to_string(ex.heatmap.target_class)},
            {"counterfactual_target", to_string(ex.counterfactual.target_class)}};
  j["out_of_mask_relevance"] = relevance ? json(round_to(*relevance, 6)) : json(nullptr);
  return j;
}

ModelOutcome run_model(const PipelineConfig& cfg, Architecture arch, const PreparedData& data, const fs::path& dir,
                       json& artifacts) {
  const ArchitectureSpec spec = cfg.spec_for(arch);
  const std::string name(to_string(arch));
  const fs::path arch_dir = dir / name;
  const int size = spec.input_size;

  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed.value();
  TrainedClassifier model =
      train_classifier(build_classifier(spec), fit(data.splits.train, size), fit(data.splits.val, size), tcfg);
  model.save(arch_dir / "model.ckpt");

  const auto test = fit(data.splits.test, size);
  std::vector<PredictionRecord> records;
  std::vector<ClassLabel> truths, preds;
  for (const auto& img : test) {
    records.push_back({img.source_id, img.label, predict(model, img.image)});
    truths.push_back(img.label);
    preds.push_back(records.back().prediction.label);
  }
  ModelOutcome outcome;
  outcome.model = name;
  outcome.confusion = confusion_from_predictions(truths, preds);
  outcome.metrics = compute_metrics(outcome.confusion);

  write_text(arch_dir / "predictions.csv", predictions_csv(records));
  json metrics = metrics_to_json(outcome.confusion, outcome.metrics);
  json history = json::array();
  for (const auto& e : model.history()) {
    history.push_back({{"train_loss", round_to(e.train_loss, 6)},
                       {"train_accuracy", round_to(e.train_accuracy, 6)},
                       {"val_loss", round_to(e.val_loss, 6)},
                       {"val_accuracy", round_to(e.val_accuracy, 6)}});
  }
  write_text(arch_dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(arch_dir / "history.json", history.dump(2) + "\n");
  write_image(arch_dir / "confusion.png",
              render_confusion(outcome.confusion, fmt::format("{} ({})", name, cfg.segmentation ? "segmented" : "unsegmented")));
  for (const char* f : {"model.ckpt", "predictions.csv", "metrics.json", "history.json", "confusion.png"}) {
    artifacts.push_back((fs::path(name) / f).generic_string());
  }

  if (cfg.explain) {
    const fs::path ex_dir = arch_dir / "explain";
    double relevance_sum = 0.0, positive_sum = 0.0;
    std::size_t relevance_n = 0, positive_n = 0;
    json summary = json::object();
    for (const auto& img : test) {
      const Explanation ex = counterfactual_cam(model, img.image);
      std::optional<double> relevance;
      if (auto it = data.masks.find(img.source_id); it != data.masks.end()) {
        relevance = out_of_mask_relevance(ex.heatmap, resize_mask(it->second, size, size));
        relevance_sum += *relevance;
        ++relevance_n;
        if (ex.prediction.label == ClassLabel::kCovid) {
          positive_sum += *relevance;
          ++positive_n;
        }
      }
      const std::string stem = stem_of(img.source_id);
      write_image(ex_dir / (stem + "_heatmap.png"), heatmap_image(ex.heatmap));
      write_image(ex_dir / (stem + "_counterfactual.png"), heatmap_image(ex.counterfactual));
      write_image(ex_dir / (stem + "_overlay.png"), overlay_heatmap(img.image, ex.heatmap, cfg.overlay_alpha));
      const json record = explain_record(ex, relevance);
      write_text(ex_dir / (stem + ".json"), record.dump(2) + "\n");
      summary[img.source_id] = record;
    }
    json doc = {{"images", summary}, {"count", test.size()}};
    if (relevance_n > 0) {
      outcome.mean_out_of_mask_relevance = relevance_sum / static_cast<double>(relevance_n);
      doc["mean_out_of_mask_relevance"] = round_to(*outcome.mean_out_of_mask_relevance, 6);
    } else {
      doc["mean_out_of_mask_relevance"] = nullptr;
    }
    // Where the model finds covid evidence: heatmaps of positive predictions only.
    if (positive_n > 0) {
      outcome.mean_positive_out_of_mask_relevance = positive_sum / static_cast<double>(positive_n);
      doc["mean_positive_out_of_mask_relevance"] = round_to(*outcome.mean_positive_out_of_mask_relevance, 6);
    } else {
      doc["mean_positive_out_of_mask_relevance"] = nullptr;
    }
    write_text(arch_dir / "explain_summary.json", doc.dump(2) + "\n");
    artifacts.push_back((fs::path(name) / "explain_summary.json").generic_string());
  }
  return outcome;
}

void write_run_manifest(const PipelineConfig& cfg, const fs::path& dir, const json& artifacts,
                        const std::vector<std::string>& failures) {
  const json manifest = {{"config", cfg.to_json()},
                         {"config_hash", config_hash(cfg)},
                         {"seed", cfg.seed.value()},
                         {"artifacts", artifacts},
                         {"preprocess_failures", failures}};
  write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
}

}  // namespace

RunSummary run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  const PreparedData data = prepare_data(cfg);
  write_manifest_csv(dir / "manifest.csv", data.manifest);
  write_text(dir / "splits.json", splits_to_json(data.assignment).dump(2) + "\n");
  json artifacts = json::array({"manifest.csv", "splits.json"});

  RunSummary summary;
  summary.directory = dir;
  json all_metrics = json::object();
  std::string all_predictions = "model,source_id,true_label,predicted_label,p_covid,p_normal\n";
  for (auto arch : cfg.architectures) {
    summary.models.push_back(run_model(cfg, arch, data, dir, artifacts));
    const auto& outcome = summary.models.back();
    all_metrics[outcome.model] = metrics_to_json(outcome.confusion, outcome.metrics);
    std::ifstream in(dir / outcome.model / "predictions.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) all_predictions += outcome.model + "," + line + "\n";
  }
  write_text(dir / "metrics.json", json({{"models", all_metrics}}).dump(2) + "\n");
  write_text(dir / "predictions.csv", all_predictions);
  artifacts.push_back("metrics.json");
  artifacts.push_back("predictions.csv");
  write_run_manifest(cfg, dir, artifacts, data.failures);
  return summary;
}

std::pair<RunSummary, RunSummary> run_comparison(const PipelineConfig& cfg) {
  cfg.validate();
  if (!cfg.segmentation) {
    throw Error(ErrorKind::kInvalidConfig, "segmentation: comparison mode needs segmentation weights");
  }
  PipelineConfig seg_cfg = cfg;
  seg_cfg.output = cfg.output / "segmented";
  PipelineConfig raw_cfg = cfg;
  raw_cfg.segmentation = false;
  raw_cfg.output = cfg.output / "unsegmented";
  const RunSummary raw = run_pipeline(raw_cfg);
  const RunSummary seg = run_pipeline(seg_cfg);

  std::string table = "model,mode,accuracy,sensitivity,specificity,precision,f1,tp,fp,tn,fn\n";
  auto fmt_metric = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); };
  for (std::size_t i = 0; i < raw.models.size(); ++i) {
    std::vector<RasterImage> panels;
    for (const auto* run : {&raw, &seg}) {
      const auto& m = run->models[i];
      const char* mode = run == &raw ? "unsegmented" : "segmented";
      table += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", m.model, mode, fmt_metric(m.metrics.accuracy),
                           fmt_metric(m.metrics.sensitivity), fmt_metric(m.metrics.specificity),
                           fmt_metric(m.metrics.precision), fmt_metric(m.metrics.f1), m.confusion.tp, m.confusion.fp,
                           m.confusion.tn, m.confusion.fn);
      panels.push_back(render_confusion(m.confusion, fmt::format("{} {}", m.model, mode)));
    }
    write_image(cfg.output / fmt::format("comparison_{}.png", raw.models[i].model), side_by_side(panels));
  }
  write_text(cfg.output / "comparison.csv", table);
  return {seg, raw};
}

SweepResult run_sweep_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (!cfg.sweep) throw Error(ErrorKind::kInvalidConfig, "sweep: section required");
  SweepConfig sweep_cfg = *cfg.sweep;
  sweep_cfg.seed = cfg.seed.value();
  const PreparedData data = prepare_data(cfg);
  const auto pool = generate_augmented_set(data.splits.train, sweep_cfg);

  std::vector<ArchitectureSpec> specs;
  for (auto arch : cfg.architectures) specs.push_back(cfg.spec_for(arch));
  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed.value();
  const SweepResult result = run_sweep(data.splits, pool, specs, tcfg, sweep_cfg);

  fs::create_directories(cfg.output);
  write_text(cfg.output / "sweep.csv", result.to_csv());
  write_text(cfg.output / "splits.json", splits_to_json(data.assignment).dump(2) + "\n");
  json artifacts = json::array({"sweep.csv", "splits.json"});
  write_run_manifest(cfg, cfg.output, artifacts, data.failures);
  return result;
}

}  // namespace lungscope
