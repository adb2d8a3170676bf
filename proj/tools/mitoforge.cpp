// Copyright (c) 2026, The mitoforge Authors. All rights reserved.
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


// mitoforge command line: stain normalization, tiling, splitting,
// augmentation, cascade simulation and evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mitoforge/augment.hpp"
#include "mitoforge/cascade.hpp"
#include "mitoforge/config.hpp"
#include "mitoforge/error.hpp"
#include "mitoforge/eval.hpp"
#include "mitoforge/formats.hpp"
#include "mitoforge/fs_util.hpp"
#include "mitoforge/image.hpp"
#include "mitoforge/random.hpp"
#include "mitoforge/stain.hpp"
#include "mitoforge/tiling.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;

namespace mitoforge::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

std::mutex log_mutex;

void log(std::string_view level, const std::string& message) {
  std::lock_guard lock(log_mutex);
  std::cerr << "mitoforge: " << level << ": " << message << "\n";
}

void warn(const std::string& message) { log("warning", message); }
void info(const std::string& message) { log("info", message); }

std::string describe(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

/// Logs every captured failure and returns how many there were.
std::size_t report_failures(const std::vector<std::exception_ptr>& errors,
                            const std::function<std::string(std::size_t)>& name) {
  std::size_t failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    ++failed;
    log("error", name(i) + ": " + describe(errors[i]));
  }
  return failed;
}

void emit_json(const Json& j, const std::optional<fs::path>& output) {
  if (output) {
    if (output->has_parent_path()) fs::create_directories(output->parent_path());
    write_text_atomic(*output, dump(j));
  } else {
    std::cout << dump(j);
  }
}

/// Options shared by every subcommand, plus per-command overrides of config
/// fields. Overrides are applied on top of --config and then validated.
struct Globals {
  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

struct StainOptions {
  fs::path input;
  std::optional<fs::path> reference;
  fs::path output;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<double> io;
};

struct TileOptions {
  std::vector<fs::path> images;
  fs::path annotations;
  fs::path output;
  std::optional<int> tile_size;
  std::optional<int> stride;
  std::optional<double> min_visible_iou;
  bool keep_empty = false;
};

struct SplitOptions {
  fs::path manifest;
  fs::path output;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> val_count;
  std::optional<double> train_fraction;
};

struct AugmentOptions {
  fs::path manifest;
  std::optional<fs::path> patches;
  fs::path output;
  int copies = 1;
  std::optional<double> flip_probability;
  std::optional<int> crop_size;
  std::optional<double> crop_min_iou;
};

struct CascadeOptions {
  fs::path proposals;
  fs::path gts;
  std::optional<fs::path> output;
  std::optional<std::vector<double>> thresholds;
  std::optional<std::string> sampler;
  std::optional<std::size_t> samples_per_image;
  std::optional<double> positive_fraction;
  std::optional<double> refine_blend;
  std::optional<int> iou_bins;
};

struct EvalOptions {
  fs::path detections;
  fs::path gts;
  std::optional<fs::path> output;
  std::optional<fs::path> pr_csv;
  std::optional<fs::path> pr_svg;
  std::optional<std::string> criterion;
  std::optional<double> iou_tau;
  std::optional<double> distance;
  std::optional<std::string> distance_unit;
  std::optional<double> microns_per_pixel;
  std::optional<std::string> averaging;
  std::optional<double> nms_threshold;
  std::optional<double> score_threshold;
};

template <typename T>
void apply(std::optional<T> value, T& field) {
  if (value) field = *value;
}

PipelineConfig base_config(const Globals& g) {
  PipelineConfig cfg = g.config_path ? load_config(*g.config_path) : PipelineConfig{};
  apply(g.seed, cfg.seed);
  apply(g.jobs, cfg.jobs);
  return cfg;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

// ---------------------------------------------------------------- stain

StainBasis load_reference(const fs::path& path, const PipelineConfig& cfg) {
  if (path.extension() == ".json") {
    StainBasis basis = load_stain_basis(path);
    validate(basis);
    return basis;
  }
  const MacenkoParams params = cfg.macenko_params();
  try {
    return estimate_stain_basis(rgb_to_od<double>(read_image(path), params.io), params);
  } catch (const DegenerateTissue& e) {
    throw DegenerateTissue("reference " + path.string() + ": " + e.what());
  }
}

int run_stain_normalize(const Globals& g, const StainOptions& o) {
  PipelineConfig cfg = base_config(g);
  apply(o.beta, cfg.stain.beta);
  apply(o.alpha, cfg.stain.alpha);
  apply(o.io, cfg.io);
  if (o.reference) cfg.stain.reference_basis_path = o.reference->string();
  validate(cfg);
  if (cfg.stain.reference_basis_path.empty()) {
    throw ConfigError("stain.reference_basis_path", "a reference basis file or image is required");
  }
  if (!fs::is_directory(o.input)) throw IoError("input directory not found: " + o.input.string());

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(o.input)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  const MacenkoParams params = cfg.macenko_params();
  const StainBasis reference = load_reference(cfg.stain.reference_basis_path, cfg);
  fs::create_directories(o.output);
  save_stain_basis(o.output / "reference_basis.json", reference);

  if (inputs.empty()) {
    warn("no images found in " + o.input.string());
    return kExitOk;
  }

  const auto errors = parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) {
    const ImagePatch patch = read_image(inputs[i]);
    const fs::path target = o.output / inputs[i].filename().replace_extension(".png");
    try {
      write_png(target, normalize_to_reference(patch, reference, params));
    } catch (const DegenerateTissue& e) {
      warn(inputs[i].string() + ": " + e.what() + "; copied through unchanged");
      write_png(target, patch);
    }
  });
  const std::size_t failed =
      report_failures(errors, [&](std::size_t i) { return inputs[i].string(); });
  info("normalized " + std::to_string(inputs.size() - failed) + " of " +
       std::to_string(inputs.size()) + " images");
  return failed == 0 ? kExitOk : kExitInput;
}

// ---------------------------------------------------------------- tile

const AnnotatedImage& annotations_for(const std::vector<AnnotatedImage>& all, const fs::path& image,
                                      const fs::path& file) {
  const std::string id = image.stem().string();
  for (const AnnotatedImage& a : all) {
    if (a.image_id == id) return a;
  }
  if (all.size() == 1) return all.front();
  throw IoError(file.string() + ": no entry with image_id \"" + id + "\"");
}

int run_tile(const Globals& g, const TileOptions& o) {
  PipelineConfig cfg = base_config(g);
  apply(o.tile_size, cfg.tiling.tile_size);
  if (o.stride) cfg.tiling.stride = o.stride;
  apply(o.min_visible_iou, cfg.tiling.min_visible_iou);
  if (o.keep_empty) cfg.tiling.keep_empty = true;
  validate(cfg);

  const std::vector<AnnotatedImage> all = load_annotation_file(o.annotations);
  fs::create_directories(o.output);

  std::vector<std::vector<PatchRecord>> per_image(o.images.size());
  const auto errors = parallel_for(o.images.size(), cfg.jobs, [&](std::size_t i) {
    const ImagePatch image = read_image(o.images[i]);
    const AnnotatedImage& ann = annotations_for(all, o.images[i], o.annotations);
    if (ann.width != image.width() || ann.height != image.height()) {
      throw SchemaError(o.annotations.string() + ":" + ann.image_id,
                        "declared size " + std::to_string(ann.width) + "x" +
                            std::to_string(ann.height) + " differs from image " +
                            std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
    const TileGrid grid =
        build_tile_grid({image.width(), image.height()}, cfg.tiling.tile_size, cfg.tiling.stride);
    std::vector<PatchRecord> records = project_annotations(ann.annotations, grid, ann.image_id,
                                                           cfg.tiling.min_visible_iou);
    if (!cfg.tiling.keep_empty) records = filter_nonempty(std::move(records));
    for (const PatchRecord& r : records) {
      write_png(o.output / r.file_name(),
                image.crop(r.origin.x, r.origin.y, r.tile_size, r.tile_size));
    }
    per_image[i] = std::move(records);
  });
  if (report_failures(errors, [&](std::size_t i) { return o.images[i].string(); }) > 0) {
    return kExitInput;
  }

  std::vector<PatchRecord> manifest;
  for (auto& records : per_image) {
    std::move(records.begin(), records.end(), std::back_inserter(manifest));
  }
  write_text_atomic(o.output / "manifest.jsonl", to_manifest(manifest));
  info("wrote " + std::to_string(manifest.size()) + " patches");
  return kExitOk;
}

// ---------------------------------------------------------------- split

int run_split(const Globals& g, const SplitOptions& o) {
  PipelineConfig cfg = base_config(g);
  validate(cfg);
  std::vector<PatchRecord> records = load_manifest(o.manifest);
  const std::size_t n = records.size();

  DatasetSplit split;
  if (o.train_count) {
    if (o.train_fraction) throw ConfigError("split", "give either counts or a fraction, not both");
    const std::size_t val = o.val_count ? *o.val_count : n - std::min(n, *o.train_count);
    split = split_random(std::move(records), *o.train_count, val, cfg.seed);
  } else if (o.train_fraction) {
    if (o.val_count) throw ConfigError("split", "--val-count needs --train-count");
    if (!(*o.train_fraction >= 0.0 && *o.train_fraction <= 1.0)) {
      throw ConfigError("split.train_fraction", "must lie in [0, 1]");
    }
    split = split_random_fraction(std::move(records), *o.train_fraction, cfg.seed);
  } else {
    throw ConfigError("split", "one of --train-count or --train-fraction is required");
  }

  fs::create_directories(o.output);
  write_text_atomic(o.output / "train.jsonl", to_manifest(split.train));
  write_text_atomic(o.output / "val.jsonl", to_manifest(split.val));
  info("split " + std::to_string(n) + " records into " + std::to_string(split.train.size()) +
       " train and " + std::to_string(split.val.size()) + " val");
  return kExitOk;
}

// ---------------------------------------------------------------- augment

int run_augment(const Globals& g, const AugmentOptions& o) {
  PipelineConfig cfg = base_config(g);
  apply(o.flip_probability, cfg.augment.flip_probability);
  apply(o.crop_size, cfg.augment.crop_size);
  apply(o.crop_min_iou, cfg.augment.crop_min_iou);
  validate(cfg);
  if (o.copies < 1) throw ConfigError("copies", "must be >= 1");

  const std::vector<PatchRecord> records = load_manifest(o.manifest);
  const fs::path patches = o.patches.value_or(o.manifest.parent_path());
  fs::create_directories(o.output);

  const auto copies = static_cast<std::size_t>(o.copies);
  std::vector<PatchRecord> out(records.size() * copies);
  const auto errors = parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
    const PatchRecord& rec = records[i];
    const Sample sample{read_image(patches / rec.file_name()), rec.annotations};
    const std::string stem = fs::path(rec.file_name()).stem().string();
    for (std::size_t k = 0; k < copies; ++k) {
      Rng rng = Rng::derive(cfg.seed, i * copies + k);
      const Sample result = augment(sample, cfg.augment, rng);
      PatchRecord& r = out[i * copies + k];
      r.image_id = rec.image_id;
      r.origin = rec.origin;
      r.tile_size = result.patch.width();
      r.annotations = result.boxes;
      r.file = stem + "_aug" + std::to_string(k) + ".png";
      write_png(o.output / r.file, result.patch);
    }
  });
  if (report_failures(errors, [&](std::size_t i) { return (patches / records[i].file_name()).string(); }) >
      0) {
    return kExitInput;
  }
  write_text_atomic(o.output / "manifest.jsonl", to_manifest(out));
  info("wrote " + std::to_string(out.size()) + " augmented patches");
  return kExitOk;
}

// ---------------------------------------------------------------- cascade

Json aggregate(const std::vector<CascadeReport>& reports, std::size_t stages) {
  Json out = Json::array();
  for (std::size_t s = 0; s < stages; ++s) {
    std::size_t pos = 0, neg = 0, spos = 0, sneg = 0;
    double iou_sum = 0.0;
    for (const CascadeReport& r : reports) {
      const StageStats& st = r.stages[s];
      pos += st.positives;
      neg += st.negatives;
      spos += st.sampled_positives;
      sneg += st.sampled_negatives;
      iou_sum += st.mean_pos_iou * static_cast<double>(st.positives);
    }
    out.push_back({{"stage", s},
                   {"positives", pos},
                   {"negatives", neg},
                   {"sampled_positives", spos},
                   {"sampled_negatives", sneg},
                   {"mean_pos_iou", pos > 0 ? iou_sum / static_cast<double>(pos) : 0.0}});
  }
  return out;
}

int run_simulate_cascade(const Globals& g, const CascadeOptions& o) {
  PipelineConfig cfg = base_config(g);
  if (o.thresholds) {
    cfg.cascade.pos_thresholds = *o.thresholds;
    cfg.cascade.neg_thresholds.reset();
  }
  if (o.sampler) {
    const auto s = parse_sampler(*o.sampler);
    if (!s) throw ConfigError("cascade.sampler", "unknown sampler \"" + *o.sampler + "\"");
    cfg.cascade.sampler = *s;
  }
  apply(o.samples_per_image, cfg.cascade.samples_per_image);
  apply(o.positive_fraction, cfg.cascade.positive_fraction);
  apply(o.refine_blend, cfg.cascade.refine_blend);
  apply(o.iou_bins, cfg.cascade.iou_bins);
  validate(cfg);
  const std::vector<CascadeStageConfig> stages = cfg.cascade.stages();

  // Proposals keyed by image; tile-local sets are moved to image coordinates.
  std::map<std::string, std::vector<Detection>> proposals;
  for (const DetectionSet& set : load_detection_file(o.proposals)) {
    auto& dst = proposals[set.image_id];
    for (Detection d : set.detections) {
      if (set.origin) d.box = d.box.translated(set.origin->x, set.origin->y);
      dst.push_back(d);
    }
  }
  std::map<std::string, std::vector<BBox>> gts;
  for (const AnnotatedImage& img : load_annotation_file(o.gts)) {
    auto& dst = gts[img.image_id];
    for (const Annotation& a : img.annotations) dst.push_back(a.box);
  }
  for (const auto& [id, boxes] : gts) {
    if (!proposals.contains(id)) warn("image " + id + " has ground truth but no proposals; skipped");
  }

  std::vector<std::string> ids;
  for (const auto& [id, dets] : proposals) {
    if (dets.empty()) {
      warn("image " + id + " has no proposals; skipped");
      continue;
    }
    if (!gts.contains(id)) warn("image " + id + " has no ground truth; all proposals negative");
    ids.push_back(id);
  }

  std::vector<CascadeReport> reports(ids.size());
  const auto errors = parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const std::vector<Detection>& dets = proposals.at(ids[i]);
    std::vector<BBox> boxes;
    boxes.reserve(dets.size());
    for (const Detection& d : dets) boxes.push_back(d.box);
    const auto it = gts.find(ids[i]);
    const std::vector<BBox> none;
    const std::vector<BBox>& gt = it == gts.end() ? none : it->second;

    // Cross-entropy of each proposal's score against its stage label.
    const LossProvider losses = [&](std::size_t, const AssignmentResult& assignment) {
      std::vector<double> out(assignment.size());
      for (std::size_t k = 0; k < assignment.size(); ++k) {
        const double s = std::clamp(dets[k].score, 1e-12, 1.0 - 1e-12);
        out[k] = assignment[k].status == ProposalStatus::Positive ? -std::log(s) : -std::log1p(-s);
      }
      return out;
    };
    Rng rng = Rng::derive(cfg.seed, i);
    reports[i] = run_cascade(boxes, gt, stages, cfg.cascade.refine_blend, rng, losses);
  });
  if (report_failures(errors, [&](std::size_t i) { return "image " + ids[i]; }) > 0) {
    return kExitInput;
  }

  Json per_image = Json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) per_image[ids[i]] = to_json(reports[i])["stages"];
  emit_json({{"stages", aggregate(reports, stages.size())}, {"per_image", std::move(per_image)}},
            o.output);
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

void apply_eval_options(const EvalOptions& o, PipelineConfig& cfg) {
  if (o.criterion) {
    if (*o.criterion == "iou") {
      cfg.eval.criterion = MatchCriterion::Kind::IoU;
    } else if (*o.criterion == "center_distance") {
      cfg.eval.criterion = MatchCriterion::Kind::CenterDistance;
    } else {
      throw ConfigError("eval.criterion",
                        "expected \"iou\" or \"center_distance\", got \"" + *o.criterion + "\"");
    }
  }
  if (o.averaging) {
    if (*o.averaging == "micro") {
      cfg.eval.averaging = Averaging::Micro;
    } else if (*o.averaging == "macro") {
      cfg.eval.averaging = Averaging::Macro;
    } else {
      throw ConfigError("eval.averaging", "expected \"micro\" or \"macro\", got \"" + *o.averaging + "\"");
    }
  }
  apply(o.iou_tau, cfg.eval.iou_tau);
  apply(o.distance, cfg.eval.distance);
  apply(o.distance_unit, cfg.eval.distance_unit);
  if (o.microns_per_pixel) cfg.eval.microns_per_pixel = o.microns_per_pixel;
  apply(o.nms_threshold, cfg.eval.nms_threshold);
  apply(o.score_threshold, cfg.eval.score_threshold);
  validate(cfg);
}

struct EvalInputs {
  std::vector<Detection> detections;
  std::vector<Annotation> gts;
};

/// Loads both files, stitches tile-local detection sets and warns about
/// image ids present on only one side.
EvalInputs load_eval_inputs(const EvalOptions& o, const PipelineConfig& cfg) {
  EvalInputs in;
  std::map<std::string, std::vector<TileDetections>> tiles;
  std::set<std::string> det_ids;
  for (DetectionSet& set : load_detection_file(o.detections)) {
    det_ids.insert(set.image_id);
    if (set.origin) {
      tiles[set.image_id].push_back({*set.origin, std::move(set.detections)});
    } else {
      std::move(set.detections.begin(), set.detections.end(), std::back_inserter(in.detections));
    }
  }
  for (const auto& [id, per_tile] : tiles) {
    const auto stitched = stitch_detections(per_tile, cfg.eval.nms_threshold);
    in.detections.insert(in.detections.end(), stitched.begin(), stitched.end());
  }
  std::set<std::string> gt_ids;
  for (AnnotatedImage& img : load_annotation_file(o.gts)) {
    gt_ids.insert(img.image_id);
    std::move(img.annotations.begin(), img.annotations.end(), std::back_inserter(in.gts));
  }
  for (const std::string& id : det_ids) {
    if (!gt_ids.contains(id)) warn("image " + id + " has detections but no ground truth entry");
  }
  for (const std::string& id : gt_ids) {
    if (!det_ids.contains(id)) warn("image " + id + " has ground truth but no detection entry");
  }
  return in;
}

int run_evaluate(const Globals& g, const EvalOptions& o) {
  PipelineConfig cfg = base_config(g);
  apply_eval_options(o, cfg);
  const EvalInputs in = load_eval_inputs(o, cfg);
  const EvalReport report = evaluate(in.detections, in.gts, cfg.eval.eval_config());
  if (o.pr_csv) export_pr_csv(report.curves, *o.pr_csv);
  if (o.pr_svg) export_pr_svg(report.curves, *o.pr_svg);
  emit_json(to_json(report), o.output);
  return kExitOk;
}

int run_pr_export(const Globals& g, const EvalOptions& o) {
  PipelineConfig cfg = base_config(g);
  apply_eval_options(o, cfg);
  const EvalInputs in = load_eval_inputs(o, cfg);
  const auto kept = suppress_duplicates(in.detections, cfg.eval.nms_threshold);
  const auto curves = pr_curves(kept, in.gts, cfg.eval.match_criterion());
  export_pr_csv(curves, o.pr_csv.value());
  if (o.pr_svg) export_pr_svg(curves, *o.pr_svg);
  return kExitOk;
}

// ---------------------------------------------------------------- main

void add_eval_flags(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--detections", o.detections, "detection JSON/JSONL file")->required();
  cmd->add_option("--gts", o.gts, "ground-truth annotation JSON/JSONL file")->required();
  cmd->add_option("--criterion", o.criterion, "iou or center_distance");
  cmd->add_option("--iou-tau", o.iou_tau, "minimum IoU for a match");
  cmd->add_option("--distance", o.distance, "maximum center distance for a match");
  cmd->add_option("--distance-unit", o.distance_unit, "pixels or microns");
  cmd->add_option("--microns-per-pixel", o.microns_per_pixel, "resolution for micron distances");
  cmd->add_option("--averaging", o.averaging, "micro or macro");
  cmd->add_option("--nms-threshold", o.nms_threshold, "IoU above which duplicates are dropped");
  cmd->add_option("--score-threshold", o.score_threshold, "score cut for P/R/F1");
}

int run(int argc, char** argv) {
  CLI::App app{"mitoforge: mitosis detection data pipeline and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "TOML or JSON pipeline config");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--jobs", g.jobs, "worker threads");

  StainOptions stain;
  auto* c_stain = app.add_subcommand("stain-normalize", "Macenko-normalize a directory of patches");
  c_stain->add_option("--input", stain.input, "input image directory")->required();
  c_stain->add_option("--reference", stain.reference, "stain basis JSON or reference image");
  c_stain->add_option("--output", stain.output, "output directory")->required();
  c_stain->add_option("--beta", stain.beta, "OD background threshold");
  c_stain->add_option("--alpha", stain.alpha, "angle percentile");
  c_stain->add_option("--io", stain.io, "reference white intensity");

  TileOptions tile;
  auto* c_tile = app.add_subcommand("tile", "cut images into patches with projected annotations");
  c_tile->add_option("--image", tile.images, "input image (repeatable)")->required();
  c_tile->add_option("--annotations", tile.annotations, "annotation JSON/JSONL file")->required();
  c_tile->add_option("--output", tile.output, "output directory")->required();
  c_tile->add_option("--tile-size", tile.tile_size, "tile side in pixels");
  c_tile->add_option("--stride", tile.stride, "anchor stride in pixels");
  c_tile->add_option("--min-visible-iou", tile.min_visible_iou, "IoU kept after clipping");
  c_tile->add_flag("--keep-empty", tile.keep_empty, "keep tiles without annotations");

  SplitOptions split;
  auto* c_split = app.add_subcommand("split", "random train/val split of a manifest");
  c_split->add_option("--manifest", split.manifest, "input manifest")->required();
  c_split->add_option("--output", split.output, "output directory")->required();
  c_split->add_option("--train-count", split.train_count, "exact number of training records");
  c_split->add_option("--val-count", split.val_count, "exact number of validation records");
  c_split->add_option("--train-fraction", split.train_fraction, "fraction of records for training");

  AugmentOptions aug;
  auto* c_aug = app.add_subcommand("augment", "write augmented copies of manifest patches");
  c_aug->add_option("--manifest", aug.manifest, "input manifest")->required();
  c_aug->add_option("--patches", aug.patches, "patch directory (default: manifest directory)");
  c_aug->add_option("--output", aug.output, "output directory")->required();
  c_aug->add_option("--copies", aug.copies, "augmented copies per patch");
  c_aug->add_option("--flip-probability", aug.flip_probability, "per-axis flip probability");
  c_aug->add_option("--crop-size", aug.crop_size, "random crop side");
  c_aug->add_option("--crop-min-iou", aug.crop_min_iou, "clipped IoU a box needs to survive");

  CascadeOptions cas;
  auto* c_cas = app.add_subcommand("simulate-cascade", "run cascade assignment and sampling");
  c_cas->add_option("--proposals", cas.proposals, "proposal detection file")->required();
  c_cas->add_option("--gts", cas.gts, "ground-truth annotation file")->required();
  c_cas->add_option("--output", cas.output, "report path (default: stdout)");
  c_cas->add_option("--thresholds", cas.thresholds, "per-stage IoU thresholds")->delimiter(',');
  c_cas->add_option("--sampler", cas.sampler, "random, ohem or iou_balanced");
  c_cas->add_option("--samples-per-image", cas.samples_per_image, "samples per stage");
  c_cas->add_option("--positive-fraction", cas.positive_fraction, "positive share of samples");
  c_cas->add_option("--refine-blend", cas.refine_blend, "box refinement toward gt, in [0, 1]");
  c_cas->add_option("--iou-bins", cas.iou_bins, "negative IoU bins for iou_balanced");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("evaluate", "match detections to ground truth and report metrics");
  add_eval_flags(c_eval, ev);
  c_eval->add_option("--output", ev.output, "report path (default: stdout)");
  c_eval->add_option("--pr-csv", ev.pr_csv, "write PR curves as CSV");
  c_eval->add_option("--pr-svg", ev.pr_svg, "write PR curves as SVG");

  EvalOptions pr;
  auto* c_pr = app.add_subcommand("pr-export", "export precision-recall curves");
  add_eval_flags(c_pr, pr);
  c_pr->add_option("--output", pr.pr_csv, "CSV path")->required();
  c_pr->add_option("--svg", pr.pr_svg, "optional SVG plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c_stain->parsed()) return run_stain_normalize(g, stain);
    if (c_tile->parsed()) return run_tile(g, tile);
    if (c_split->parsed()) return run_split(g, split);
    if (c_aug->parsed()) return run_augment(g, aug);
    if (c_cas->parsed()) return run_simulate_cascade(g, cas);
    if (c_eval->parsed()) return run_evaluate(g, ev);
    if (c_pr->parsed()) return run_pr_export(g, pr);
  } catch (const ConfigError& e) {
    log("error", std::string("config: ") + e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log("error", e.what());
    return kExitInput;
  }
  return kExitConfig;
}

}  // namespace
}  // namespace mitoforge::cli

int main(int argc, char** argv) { return mitoforge::cli::run(argc, argv); }
