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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "lungscope/classifier.hpp"
#include "lungscope/dataset.hpp"
#include "lungscope/enhancement.hpp"
#include "lungscope/errors.hpp"
#include "lungscope/evaluation.hpp"
#include "lungscope/explain.hpp"
#include "lungscope/image_io.hpp"
#include "lungscope/pipeline.hpp"
#include "lungscope/render.hpp"
#include "lungscope/segmentation.hpp"

namespace fs = std::filesystem;
using namespace lungscope;
using nlohmann::json;

namespace {

struct EnhanceFlags {
  std::string method = "he";
  double clip = 2.0;
  std::vector<int> tiles{8, 8};
  double sigma = 2.0;
  double amount = 1.0;
  double laplacian_amount = 1.0;
  int order = 2;
  double cutoff = 0.25;

  void attach(CLI::App* cmd, const std::string& method_flag) {
    cmd->add_option(method_flag, method, "Enhancement: he | clahe | unsharp-g | unsharp-l | butterworth")
        ->capture_default_str();
    cmd->add_option("--clip", clip, "CLAHE clip limit (multiple of the mean bin height)")->capture_default_str();
    cmd->add_option("--tiles", tiles, "CLAHE tile grid: ROWS COLS")->expected(2)->capture_default_str();
    cmd->add_option("--sigma", sigma, "Gaussian unsharp sigma")->capture_default_str();
    cmd->add_option("--amount", amount, "Gaussian unsharp amount")->capture_default_str();
    cmd->add_option("--laplacian-amount", laplacian_amount, "Laplacian unsharp amount")->capture_default_str();
    cmd->add_option("--order", order, "Butterworth order")->capture_default_str();
    cmd->add_option("--cutoff", cutoff, "Butterworth cutoff, fraction of the sampling rate in (0, 0.5]")
        ->capture_default_str();
  }

  EnhancementConfig config() const {
    EnhancementConfig cfg;
    cfg.method = parse_enhancement_method(method);
    cfg.clahe_clip = clip;
    cfg.clahe_tile_rows = tiles.at(0);
    cfg.clahe_tile_cols = tiles.at(1);
    cfg.unsharp_sigma = sigma;
    cfg.unsharp_amount = amount;
    cfg.laplacian_amount = laplacian_amount;
    cfg.butterworth_order = order;
    cfg.butterworth_cutoff = cutoff;
    cfg.validate();
    return cfg;
  }
};

struct Item {
  fs::path path;
  std::string id;
  std::optional<ClassLabel> label;
};

// A class-structured dataset root yields labelled items; any other
// directory yields unlabelled ones.
std::vector<Item> collect_items(const fs::path& dir) {
  std::vector<Item> items;
  if (fs::is_directory(dir / "covid") && fs::is_directory(dir / "normal")) {
    for (const auto& e : load_manifest(dir).entries) items.push_back({e.path, e.source_id, e.label});
  } else {
    for (const auto& p : list_images(dir)) items.push_back({p, fs::relative(p, dir).generic_string(), std::nullopt});
  }
  return items;
}

std::string stem_of(const std::string& id) {
  fs::path p(id);
  p.replace_extension();
  return p.generic_string();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInvalidConfig, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, path.string() + ": " + e.what());
  }
}

int cmd_enhance(const EnhanceFlags& flags, const fs::path& in, const fs::path& out) {
  const EnhancementConfig cfg = flags.config();
  const auto files = list_images(in);
  for (const auto& file : files) {
    write_image(out / fs::relative(file, in), enhance(to_grayscale(read_image(file)), cfg));
  }
  fmt::print("enhanced {} images with {}\n", files.size(), to_string(cfg.method));
  return 0;
}

int cmd_preprocess(const fs::path& data, const fs::path& weights, bool no_seg, const EnhanceFlags& flags,
                   const fs::path& out, int size, double threshold, bool keep_two) {
  PreprocessOptions options;
  options.enhancement = flags.config();
  options.output_size = size;
  options.binarize = {threshold, keep_two};
  options.cache_dir = cache_dir_from_env();
  std::optional<SegmentationModel> seg;
  if (!no_seg) {
    if (weights.empty()) throw Error(ErrorKind::kInvalidConfig, "--seg-weights is required unless --no-segmentation");
    seg.emplace(SegmentationModel::load(weights));
    options.segmentation = &*seg;
  }
  const DatasetManifest manifest = load_manifest(data);
  const PreprocessResult result = preprocess_all(manifest, options);
  write_preprocessed(out, result);
  DatasetManifest written;
  written.root = out;
  for (const auto& img : result.images) {
    written.entries.push_back({mirrored_png(out, img.source_id), img.label, img.source_id});
  }
  write_manifest_csv(out / "manifest.csv", written);
  for (const auto& f : result.failures) std::cerr << "warning: " << f << "\n";
  for (const auto& s : manifest.skipped) std::cerr << "warning: skipped unreadable " << s << "\n";
  fmt::print("preprocessed {} images ({} failed, {} skipped)\n", result.images.size(), result.failures.size(),
             manifest.skipped.size());
  return 0;
}

int cmd_segment(const fs::path& weights, const fs::path& in, const fs::path& out, const fs::path& mask_dir,
                double threshold, bool keep_two) {
  SegmentationModel model = SegmentationModel::load(weights);
  const int s = model.config().input_size;
  const auto files = list_images(in);
  for (const auto& file : files) {
    const RasterImage img = to_grayscale(read_image(file));
    const LungMask mask =
        resize_mask(binarize_mask(predict_mask(model, resize(img, s, s)), {threshold, keep_two}), img.width(),
                    img.height());
    const std::string rel = fs::relative(file, in).generic_string();
    write_image(mirrored_png(out, rel), apply_mask(img, mask));
    if (!mask_dir.empty()) write_image(mirrored_png(mask_dir, rel), mask.to_image());
  }
  fmt::print("segmented {} images\n", files.size());
  return 0;
}

int cmd_train_seg(const fs::path& images, const fs::path& masks, const fs::path& config, const fs::path& out,
                  const EnhanceFlags& flags, std::optional<int> epochs_override) {
  const json j = read_json(config);
  if (!j.contains("seed")) throw Error(ErrorKind::kInvalidConfig, "seed: required");
  UNetConfig ucfg;
  ucfg.seed = j.at("seed").get<std::uint64_t>();
  ucfg.depth = j.value("depth", ucfg.depth);
  ucfg.base_channels = j.value("base_channels", ucfg.base_channels);
  ucfg.input_size = j.value("input_size", ucfg.input_size);
  UNetTrainOptions topt;
  topt.seed = ucfg.seed;
  topt.epochs = epochs_override.value_or(j.value("epochs", topt.epochs));
  topt.learning_rate = j.value("learning_rate", topt.learning_rate);
  const EnhancementConfig ecfg = flags.config();

  std::vector<SegmentationSample> pairs;
  for (const auto& file : list_images(images)) {
    const std::string rel = fs::relative(file, images).generic_string();
    const fs::path mask_path = mirrored_png(masks, rel);
    if (!fs::exists(mask_path)) throw Error(ErrorKind::kInvalidData, "no mask for " + rel + " at " + mask_path.string());
    const RasterImage img = enhance(to_grayscale(read_image(file)), ecfg);
    const LungMask mask = LungMask::from_image(to_grayscale(read_image(mask_path)));
    pairs.push_back({resize(img, ucfg.input_size, ucfg.input_size),
                     resize_mask(mask, ucfg.input_size, ucfg.input_size)});
  }
  SegmentationModel model = build_unet(ucfg);
  train_unet(model, pairs, topt);
  model.save(out);
  double dice_sum = 0.0;
  for (const auto& p : pairs) dice_sum += dice(binarize_mask(predict_mask(model, p.image)), p.mask);
  fmt::print("trained U-Net on {} pairs for {} epochs, final loss {:.6f}, mean dice {:.4f}\n", pairs.size(),
             topt.epochs, model.training_meta().final_loss, dice_sum / static_cast<double>(pairs.size()));
  return 0;
}

std::vector<LabeledImage> load_set(const DatasetManifest& manifest, const std::vector<std::string>& ids, int size) {
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest.entries) by_id[e.source_id] = &e;
  std::vector<LabeledImage> out;
  for (const auto& id : ids) {
    const auto* e = by_id.at(id);
    out.push_back({resize(to_grayscale(read_image(e->path)), size, size), e->label, e->source_id});
  }
  return out;
}

int cmd_train(const std::string& arch, const fs::path& data, const fs::path& config, const fs::path& out) {
  PipelineConfig cfg = PipelineConfig::load(config);
  if (!cfg.seed) throw Error(ErrorKind::kInvalidConfig, "seed: required");
  const ArchitectureSpec spec = cfg.spec_for(parse_architecture(arch));
  const DatasetManifest manifest = load_manifest(data);
  const SplitAssignment split = split_dataset(manifest, cfg.split, *cfg.seed);
  TrainConfig tcfg = cfg.train;
  tcfg.seed = *cfg.seed;
  TrainedClassifier model = train_classifier(build_classifier(spec), load_set(manifest, split.train, spec.input_size),
                                             load_set(manifest, split.val, spec.input_size), tcfg);
  model.save(out);
  if (!model.history().empty()) {
    const auto& last = model.history().back();
    fmt::print("{}: {} epochs, train acc {:.4f}, val acc {:.4f}\n", arch, model.history().size(),
               last.train_accuracy, last.val_accuracy);
  }
  return 0;
}

int cmd_predict(const fs::path& ckpt, const fs::path& in, const fs::path& out) {
  TrainedClassifier model = TrainedClassifier::load(ckpt);
  std::vector<PredictionRecord> records;
  for (const auto& item : collect_items(in)) {
    const RasterImage img = resize(to_grayscale(read_image(item.path)), model.input_size(), model.input_size());
    records.push_back({item.id, item.label, predict(model, img)});
  }
  write_text(out, predictions_csv(records));
  fmt::print("wrote {} predictions to {}\n", records.size(), out.string());
  return 0;
}

int cmd_evaluate(const fs::path& pred, const fs::path& out, fs::path figure) {
  std::vector<ClassLabel> truths, preds;
  for (const auto& r : read_predictions_csv(pred)) {
    if (!r.truth) throw Error(ErrorKind::kInvalidData, "prediction for " + r.source_id + " has no true label");
    truths.push_back(*r.truth);
    preds.push_back(r.prediction.label);
  }
  const ConfusionMatrix cm = confusion_from_predictions(truths, preds);
  write_text(out, metrics_to_json(cm, compute_metrics(cm)).dump(2) + "\n");
  if (figure.empty()) figure = out.parent_path() / "confusion.png";
  write_image(figure, render_confusion(cm, "confusion matrix"));
  fmt::print("TP={} FP={} TN={} FN={}\n", cm.tp, cm.fp, cm.tn, cm.fn);
  return 0;
}

int cmd_explain(const fs::path& ckpt, const fs::path& in, const fs::path& out, const fs::path& mask_dir,
                double alpha) {
  TrainedClassifier model = TrainedClassifier::load(ckpt);
  const int s = model.input_size();
  std::size_t n = 0;
  for (const auto& item : collect_items(in)) {
    const RasterImage img = resize(to_grayscale(read_image(item.path)), s, s);
    const Explanation ex = counterfactual_cam(model, img);
    std::optional<double> relevance;
    if (!mask_dir.empty()) {
      const fs::path mp = mirrored_png(mask_dir, item.id);
      if (!fs::exists(mp)) throw Error(ErrorKind::kInvalidData, "no mask for " + item.id + " at " + mp.string());
      relevance = out_of_mask_relevance(ex.heatmap, resize_mask(LungMask::from_image(to_grayscale(read_image(mp))), s, s));
    }
    const std::string stem = stem_of(item.id);
    write_image(out / (stem + "_heatmap.png"), heatmap_image(ex.heatmap));
    write_image(out / (stem + "_counterfactual.png"), heatmap_image(ex.counterfactual));
    write_image(out / (stem + "_overlay.png"), overlay_heatmap(img, ex.heatmap, alpha));
    json record = {{"source_id", item.id},
                   {"predicted_label", to_string(ex.prediction.label)},
                   {"p_covid", round_to(ex.prediction.probabilities[0], 6)},
                   {"p_normal", round_to(ex.prediction.probabilities[1], 6)}};
    record["out_of_mask_relevance"] = relevance ? json(round_to(*relevance, 6)) : json(nullptr);
    write_text(out / (stem + ".json"), record.dump(2) + "\n");
    ++n;
  }
  fmt::print("explained {} images\n", n);
  return 0;
}

struct RunFlags {
  fs::path config;
  fs::path data;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::vector<std::string> archs;
  fs::path seg_weights;
  bool no_segmentation = false;
  bool explain = false;
  bool compare = false;
  std::optional<double> width;

  PipelineConfig resolve() const {
    PipelineConfig cfg = PipelineConfig::load(config);
    if (!data.empty()) cfg.data = data;
    if (!out.empty()) cfg.output = out;
    if (seed) cfg.seed = seed;
    if (epochs) cfg.train.epochs = *epochs;
    if (!archs.empty()) {
      cfg.architectures.clear();
      for (const auto& a : archs) cfg.architectures.push_back(parse_architecture(a));
    }
    if (!seg_weights.empty()) cfg.segmentation_weights = seg_weights;
    if (no_segmentation) cfg.segmentation = false;
    if (explain) cfg.explain = true;
    if (width) cfg.width = *width;
    return cfg;
  }
};

void print_summary(const RunSummary& summary) {
  for (const auto& m : summary.models) {
    fmt::print("{}: accuracy {:.4f} (TP={} FP={} TN={} FN={})", m.model, m.metrics.accuracy.value_or(0.0),
               m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.fn);
    if (m.mean_out_of_mask_relevance) fmt::print(", mean out-of-mask relevance {:.4f}", *m.mean_out_of_mask_relevance);
    if (m.mean_positive_out_of_mask_relevance) {
      fmt::print(" (positive predictions {:.4f})", *m.mean_positive_out_of_mask_relevance);
    }
    fmt::print("\n");
  }
  fmt::print("artifacts in {}\n", summary.directory.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chest X-ray enhancement, lung segmentation, classification and explanation"};
  app.require_subcommand(1);

  EnhanceFlags enhance_flags;
  fs::path in_dir, out_path;
  auto* enhance_cmd = app.add_subcommand("enhance", "Apply one enhancement filter to every image in a directory");
  enhance_flags.attach(enhance_cmd, "--method");
  enhance_cmd->add_option("--in", in_dir, "Input directory")->required();
  enhance_cmd->add_option("--out", out_path, "Output directory (same file names)")->required();

  EnhanceFlags pre_flags;
  fs::path data_dir, seg_weights;
  bool no_seg = false, keep_two = false;
  int size = 0;
  double threshold = 0.5;
  auto* pre_cmd = app.add_subcommand("preprocess", "Grayscale, enhance, segment and resize a dataset");
  pre_cmd->add_option("--data", data_dir, "Dataset root with covid/ and normal/")->required();
  pre_cmd->add_option("--seg-weights", seg_weights, "U-Net checkpoint");
  pre_cmd->add_flag("--no-segmentation", no_seg, "Skip lung segmentation");
  pre_flags.attach(pre_cmd, "--enhance");
  pre_cmd->add_option("--out", out_path, "Output directory (mirrors the dataset tree)")->required();
  pre_cmd->add_option("--size", size, "Square output size; 0 keeps source dimensions")->capture_default_str();
  pre_cmd->add_option("--threshold", threshold, "Mask probability threshold")->capture_default_str();
  pre_cmd->add_flag("--keep-two-largest", keep_two, "Keep only the two largest mask components");

  fs::path mask_dir;
  auto* seg_cmd = app.add_subcommand("segment", "Mask every image in a directory with a trained U-Net");
  seg_cmd->add_option("--weights", seg_weights, "U-Net checkpoint")->required();
  seg_cmd->add_option("--in", in_dir, "Input directory")->required();
  seg_cmd->add_option("--out", out_path, "Output directory for masked images")->required();
  seg_cmd->add_option("--save-masks", mask_dir, "Also write binary masks here");
  seg_cmd->add_option("--threshold", threshold, "Mask probability threshold")->capture_default_str();
  seg_cmd->add_flag("--keep-two-largest", keep_two, "Keep only the two largest mask components");

  EnhanceFlags seg_train_flags;
  fs::path masks_dir, config_path;
  std::optional<int> epochs;
  auto* train_seg_cmd = app.add_subcommand("train-seg", "Train a U-Net on image/mask pairs");
  train_seg_cmd->add_option("--images", in_dir, "Image directory")->required();
  train_seg_cmd->add_option("--masks", masks_dir, "Mask directory (same relative names, .png)")->required();
  train_seg_cmd->add_option("--config", config_path, "JSON: seed, depth, base_channels, input_size, epochs, learning_rate")
      ->required();
  train_seg_cmd->add_option("--epochs", epochs, "Override the configured epoch count");
  seg_train_flags.attach(train_seg_cmd, "--enhance");
  train_seg_cmd->add_option("--out", out_path, "Checkpoint to write")->required();

  std::string arch;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier on a preprocessed dataset");
  train_cmd->add_option("--arch", arch, "alexnet | resnet50 | inceptionv3 | squeezenet")->required();
  train_cmd->add_option("--data", data_dir, "Preprocessed dataset root with covid/ and normal/")->required();
  train_cmd->add_option("--config", config_path, "Pipeline JSON config (seed, split, train, width)")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();

  fs::path ckpt;
  auto* predict_cmd = app.add_subcommand("predict", "Classify images with a trained checkpoint");
  predict_cmd->add_option("--ckpt", ckpt, "Classifier checkpoint")->required();
  predict_cmd->add_option("--in", in_dir, "Image directory (labels taken from covid/ and normal/ if present)")
      ->required();
  predict_cmd->add_option("--out", out_path, "predictions.csv to write")->required();

  fs::path pred_path, figure;
  auto* eval_cmd = app.add_subcommand("evaluate", "Confusion matrix and metrics from predictions.csv");
  eval_cmd->add_option("--pred", pred_path, "predictions.csv")->required();
  eval_cmd->add_option("--out", out_path, "metrics.json to write")->required();
  eval_cmd->add_option("--figure", figure, "Confusion PNG (default: confusion.png next to --out)");

  double alpha = 0.5;
  auto* explain_cmd = app.add_subcommand("explain", "Grad-CAM heatmaps and counterfactuals");
  explain_cmd->add_option("--ckpt", ckpt, "Classifier checkpoint")->required();
  explain_cmd->add_option("--in", in_dir, "Image directory")->required();
  explain_cmd->add_option("--out", out_path, "Output directory")->required();
  explain_cmd->add_option("--mask-dir", mask_dir, "Lung masks (same relative names, .png)");
  explain_cmd->add_option("--alpha", alpha, "Overlay opacity")->capture_default_str();

  RunFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Augmentation sweep: retrain with growing augmented pools");
  sweep_cmd->add_option("--data", sweep_flags.data, "Dataset root with covid/ and normal/");
  sweep_cmd->add_option("--archs", sweep_flags.archs, "Architectures (comma separated)")->delimiter(',');
  sweep_cmd->add_option("--config", sweep_flags.config, "Pipeline JSON config")->required();
  sweep_cmd->add_option("--out", out_path, "sweep.csv to write")->required();
  sweep_cmd->add_option("--seed", sweep_flags.seed, "Override the configured seed");
  sweep_cmd->add_option("--epochs", sweep_flags.epochs, "Override the configured epoch count");
  sweep_cmd->add_option("--seg-weights", sweep_flags.seg_weights, "U-Net checkpoint");
  sweep_cmd->add_flag("--no-segmentation", sweep_flags.no_segmentation, "Skip lung segmentation");

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline: preprocess, split, train, predict, evaluate");
  run_cmd->add_option("--config", run_flags.config, "Pipeline JSON config")->required();
  run_cmd->add_option("--data", run_flags.data, "Dataset root (overrides config)");
  run_cmd->add_option("--out", run_flags.out, "Output directory (overrides config)");
  run_cmd->add_option("--seed", run_flags.seed, "Override the configured seed");
  run_cmd->add_option("--epochs", run_flags.epochs, "Override the configured epoch count");
  run_cmd->add_option("--archs", run_flags.archs, "Architectures (comma separated)")->delimiter(',');
  run_cmd->add_option("--width", run_flags.width, "Channel width multiplier");
  run_cmd->add_option("--seg-weights", run_flags.seg_weights, "U-Net checkpoint");
  run_cmd->add_flag("--no-segmentation", run_flags.no_segmentation, "Train and test on unsegmented images");
  run_cmd->add_flag("--explain", run_flags.explain, "Write heatmaps and counterfactuals for every test image");
  run_cmd->add_flag("--compare-segmentation", run_flags.compare,
                    "Run segmented and unsegmented variants side by side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*enhance_cmd) return cmd_enhance(enhance_flags, in_dir, out_path);
    if (*pre_cmd) return cmd_preprocess(data_dir, seg_weights, no_seg, pre_flags, out_path, size, threshold, keep_two);
    if (*seg_cmd) return cmd_segment(seg_weights, in_dir, out_path, mask_dir, threshold, keep_two);
    if (*train_seg_cmd) return cmd_train_seg(in_dir, masks_dir, config_path, out_path, seg_train_flags, epochs);
    if (*train_cmd) return cmd_train(arch, data_dir, config_path, out_path);
    if (*predict_cmd) return cmd_predict(ckpt, in_dir, out_path);
    if (*eval_cmd) return cmd_evaluate(pred_path, out_path, figure);
    if (*explain_cmd) return cmd_explain(ckpt, in_dir, out_path, mask_dir, alpha);
    if (*sweep_cmd) {
      PipelineConfig cfg = sweep_flags.resolve();
      cfg.output = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
      const SweepResult result = run_sweep_pipeline(cfg);
      if (out_path.filename() != "sweep.csv") fs::rename(cfg.output / "sweep.csv", out_path);
      fmt::print("{} sweep rows written to {}\n", result.rows.size(), out_path.string());
      return 0;
    }
    if (*run_cmd) {
      const PipelineConfig cfg = run_flags.resolve();
      if (run_flags.compare) {
        const auto [seg, raw] = run_comparison(cfg);
        print_summary(raw);
        print_summary(seg);
      } else {
        print_summary(run_pipeline(cfg));
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
