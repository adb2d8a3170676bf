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

#include "mitoforge/config.hpp"

#include <toml.hpp>

#include <set>
#include <sstream>

#include "mitoforge/fs_util.hpp"

namespace mitoforge {

std::vector<CascadeStageConfig> CascadeSection::stages() const {
  std::vector<CascadeStageConfig> out;
  for (std::size_t i = 0; i < pos_thresholds.size(); ++i) {
    CascadeStageConfig s;
    s.iou_pos_threshold = pos_thresholds[i];
    s.iou_neg_threshold = neg_thresholds ? (*neg_thresholds)[i] : pos_thresholds[i];
    s.samples_per_image = samples_per_image;
    s.positive_fraction = positive_fraction;
    s.sampler = sampler;
    s.iou_bins = iou_bins;
    out.push_back(s);
  }
  return out;
}

MatchCriterion EvalSection::match_criterion() const {
  if (criterion == MatchCriterion::Kind::IoU) return MatchCriterion::by_iou(iou_tau);
  const double pixels = distance_unit == "microns" ? distance / microns_per_pixel.value_or(1.0) : distance;
  return MatchCriterion::by_distance(pixels);
}

EvalConfig EvalSection::eval_config() const {
  EvalConfig c;
  c.criterion = match_criterion();
  c.score_threshold = score_threshold;
  c.nms_threshold = nms_threshold;
  c.averaging = averaging;
  return c;
}

MacenkoParams PipelineConfig::macenko_params() const {
  MacenkoParams p;
  p.io = io;
  p.beta = stain.beta;
  p.alpha = stain.alpha;
  p.concentration_percentile = stain.concentration_percentile;
  p.min_tissue_pixels = stain.min_tissue_pixels;
  return p;
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_range(const JitterRange& r, const std::string& field) {
  require(r.lo >= -1.0 && r.hi <= 1.0 && r.lo <= r.hi, field, "range must satisfy -1 <= lo <= hi <= 1");
}

/// Reads the keys of one config table, rejecting any it does not know.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected a table");
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      require(v->is_number(), field(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const Json* v = find(key)) {
      require(v->is_number_integer(), field(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        require(v->get<long long>() >= 0, field(key), "must be >= 0");
      }
      out = v->get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      require(v->is_boolean(), field(key), "expected a boolean");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      require(v->is_string(), field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const Json* v = find(key)) {
      require(v->is_array(), field(key), "expected an array of numbers");
      out.clear();
      for (const Json& e : *v) {
        require(e.is_number(), field(key), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void range(const std::string& key, JitterRange& out) {
    if (const Json* v = find(key)) {
      require(v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number(),
              field(key), "expected [lo, hi]");
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  const Json* table(const std::string& key) { return find(key); }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  // Dates and times are not used by any config field.
  return nullptr;
}

}  // namespace

void validate(const PipelineConfig& c) {
  require(c.io > 0.0, "io", "must be > 0");
  require(c.stain.beta >= 0.0, "stain.beta", "must be >= 0");
  require(c.stain.alpha >= 0.0 && c.stain.alpha < 50.0, "stain.alpha", "must lie in [0, 50)");
  require(c.stain.concentration_percentile > 0.0 && c.stain.concentration_percentile <= 100.0,
          "stain.concentration_percentile", "must lie in (0, 100]");

  require(c.tiling.tile_size > 0, "tiling.tile_size", "must be positive");
  if (c.tiling.stride) {
    require(*c.tiling.stride > 0 && *c.tiling.stride <= c.tiling.tile_size, "tiling.stride",
            "must lie in (0, tile_size]");
  }
  require(unit(c.tiling.min_visible_iou), "tiling.min_visible_iou", "must lie in [0, 1]");

  const AugmentConfig& a = c.augment;
  require(unit(a.flip_probability), "augment.flip_probability", "must lie in [0, 1]");
  require(unit(a.crop_min_iou), "augment.crop_min_iou", "must lie in [0, 1]");
  require(!a.scale_set.empty(), "augment.scale_set", "must not be empty");
  for (int s : a.scale_set) require(s > 0, "augment.scale_set", "entries must be positive");
  require(a.crop_size > 0, "augment.crop_size", "must be positive");
  require(a.crop_max_trials > 0, "augment.crop_max_trials", "must be positive");
  check_range(a.brightness, "augment.brightness");
  check_range(a.contrast, "augment.contrast");
  check_range(a.saturation, "augment.saturation");

  const CascadeSection& k = c.cascade;
  require(!k.pos_thresholds.empty(), "cascade.pos_thresholds", "must not be empty");
  for (std::size_t i = 0; i < k.pos_thresholds.size(); ++i) {
    require(unit(k.pos_thresholds[i]), "cascade.pos_thresholds", "entries must lie in [0, 1]");
    if (i > 0) {
      require(k.pos_thresholds[i] > k.pos_thresholds[i - 1], "cascade.pos_thresholds",
              "must be strictly increasing");
    }
  }
  if (k.neg_thresholds) {
    require(k.neg_thresholds->size() == k.pos_thresholds.size(), "cascade.neg_thresholds",
            "must have one entry per stage");
    for (std::size_t i = 0; i < k.pos_thresholds.size(); ++i) {
      require((*k.neg_thresholds)[i] >= 0.0 && (*k.neg_thresholds)[i] <= k.pos_thresholds[i],
              "cascade.neg_thresholds", "entries must lie in [0, pos_threshold]");
    }
  }
  require(k.samples_per_image > 0, "cascade.samples_per_image", "must be positive");
  require(unit(k.positive_fraction), "cascade.positive_fraction", "must lie in [0, 1]");
  require(k.iou_bins >= 1, "cascade.iou_bins", "must be >= 1");
  require(unit(k.refine_blend), "cascade.refine_blend", "must lie in [0, 1]");

  const ScheduleSection& s = c.schedule;
  require(s.base_lr > 0.0, "schedule.base_lr", "must be positive");
  require(s.warmup_ratio > 0.0 && s.warmup_ratio <= 1.0, "schedule.warmup_ratio", "must lie in (0, 1]");
  require(s.warmup_steps >= 1, "schedule.warmup_steps", "must be >= 1");
  require(s.batch_size >= 1, "schedule.batch_size", "must be >= 1");
  require(s.epochs >= 1, "schedule.epochs", "must be >= 1");
  require(s.grad_clip_max_norm > 0.0, "schedule.grad_clip_max_norm", "must be positive");

  const EvalSection& e = c.eval;
  require(unit(e.iou_tau), "eval.iou_tau", "must lie in [0, 1]");
  require(e.distance >= 0.0, "eval.distance", "must be >= 0");
  require(e.distance_unit == "pixels" || e.distance_unit == "microns", "eval.distance_unit",
          "must be \"pixels\" or \"microns\"");
  if (e.criterion == MatchCriterion::Kind::CenterDistance && e.distance_unit == "microns") {
    require(e.microns_per_pixel.has_value(), "eval.microns_per_pixel",
            "required when distance_unit is \"microns\"");
  }
  if (e.microns_per_pixel) require(*e.microns_per_pixel > 0.0, "eval.microns_per_pixel", "must be positive");
  require(unit(e.nms_threshold), "eval.nms_threshold", "must lie in [0, 1]");
  require(unit(e.score_threshold), "eval.score_threshold", "must lie in [0, 1]");

  require(c.jobs >= 1, "jobs", "must be >= 1");
}

PipelineConfig config_from_json(const Json& j, PipelineConfig c) {
  Section root(j, "");
  root.number("io", c.io);
  root.integer("seed", c.seed);
  root.integer("jobs", c.jobs);

  if (const Json* t = root.table("stain")) {
    Section s(*t, "stain");
    s.number("beta", c.stain.beta);
    s.number("alpha", c.stain.alpha);
    s.number("concentration_percentile", c.stain.concentration_percentile);
    s.integer("min_tissue_pixels", c.stain.min_tissue_pixels);
    s.string("reference_basis_path", c.stain.reference_basis_path);
    s.finish();
  }
  if (const Json* t = root.table("tiling")) {
    Section s(*t, "tiling");
    s.integer("tile_size", c.tiling.tile_size);
    int stride = c.tiling.stride.value_or(0);
    if (s.find("stride")) {
      s.integer("stride", stride);
      c.tiling.stride = stride;
    }
    s.number("min_visible_iou", c.tiling.min_visible_iou);
    s.boolean("keep_empty", c.tiling.keep_empty);
    s.finish();
  }
  if (const Json* t = root.table("augment")) {
    Section s(*t, "augment");
    s.number("flip_probability", c.augment.flip_probability);
    if (const Json* v = s.find("scale_set")) {
      require(v->is_array(), "augment.scale_set", "expected an array of integers");
      c.augment.scale_set.clear();
      for (const Json& e : *v) {
        require(e.is_number_integer(), "augment.scale_set", "expected an array of integers");
        c.augment.scale_set.push_back(e.get<int>());
      }
    }
    s.number("crop_min_iou", c.augment.crop_min_iou);
    s.integer("crop_size", c.augment.crop_size);
    s.integer("crop_max_trials", c.augment.crop_max_trials);
    s.range("brightness", c.augment.brightness);
    s.range("contrast", c.augment.contrast);
    s.range("saturation", c.augment.saturation);
    s.finish();
  }
  if (const Json* t = root.table("cascade")) {
    Section s(*t, "cascade");
    s.numbers("pos_thresholds", c.cascade.pos_thresholds);
    if (s.find("neg_thresholds")) {
      std::vector<double> neg;
      s.numbers("neg_thresholds", neg);
      c.cascade.neg_thresholds = neg;
    }
    std::string sampler(to_string(c.cascade.sampler));
    s.string("sampler", sampler);
    const auto parsed = parse_sampler(sampler);
    require(parsed.has_value(), "cascade.sampler", "must be random, ohem or iou_balanced");
    c.cascade.sampler = *parsed;
    s.integer("samples_per_image", c.cascade.samples_per_image);
    s.number("positive_fraction", c.cascade.positive_fraction);
    s.integer("iou_bins", c.cascade.iou_bins);
    s.number("refine_blend", c.cascade.refine_blend);
    s.finish();
  }
  if (const Json* t = root.table("schedule")) {
    Section s(*t, "schedule");
    s.number("base_lr", c.schedule.base_lr);
    s.number("warmup_ratio", c.schedule.warmup_ratio);
    s.integer("warmup_steps", c.schedule.warmup_steps);
    s.integer("batch_size", c.schedule.batch_size);
    s.integer("epochs", c.schedule.epochs);
    s.number("grad_clip_max_norm", c.schedule.grad_clip_max_norm);
    s.finish();
  }
  if (const Json* t = root.table("eval")) {
    Section s(*t, "eval");
    std::string criterion = c.eval.criterion == MatchCriterion::Kind::IoU ? "iou" : "center_distance";
    s.string("criterion", criterion);
    require(criterion == "iou" || criterion == "center_distance", "eval.criterion",
            "must be \"iou\" or \"center_distance\"");
    c.eval.criterion =
        criterion == "iou" ? MatchCriterion::Kind::IoU : MatchCriterion::Kind::CenterDistance;
    s.number("iou_tau", c.eval.iou_tau);
    s.number("distance", c.eval.distance);
    s.string("distance_unit", c.eval.distance_unit);
    if (s.find("microns_per_pixel")) {
      double mpp = 0.0;
      s.number("microns_per_pixel", mpp);
      c.eval.microns_per_pixel = mpp;
    }
    std::string averaging = c.eval.averaging == Averaging::Micro ? "micro" : "macro";
    s.string("averaging", averaging);
    require(averaging == "micro" || averaging == "macro", "eval.averaging",
            "must be \"micro\" or \"macro\"");
    c.eval.averaging = averaging == "micro" ? Averaging::Micro : Averaging::Macro;
    s.number("nms_threshold", c.eval.nms_threshold);
    s.number("score_threshold", c.eval.score_threshold);
    s.finish();
  }
  root.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Json j;
  if (path.extension() == ".toml") {
    try {
      j = toml_to_json(toml::parse(text, path.string()));
    } catch (const toml::parse_error& e) {
      std::ostringstream ss;
      ss << e.description() << " at line " << e.source().begin.line;
      throw ConfigError(path.string(), ss.str());
    }
  } else {
    j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string(), "invalid JSON");
  }
  PipelineConfig c = config_from_json(j);
  validate(c);
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["io"] = c.io;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["stain"] = {{"beta", c.stain.beta},
                {"alpha", c.stain.alpha},
                {"concentration_percentile", c.stain.concentration_percentile},
                {"min_tissue_pixels", c.stain.min_tissue_pixels},
                {"reference_basis_path", c.stain.reference_basis_path}};
  j["tiling"] = {{"tile_size", c.tiling.tile_size},
                 {"min_visible_iou", c.tiling.min_visible_iou},
                 {"keep_empty", c.tiling.keep_empty}};
  if (c.tiling.stride) j["tiling"]["stride"] = *c.tiling.stride;
  j["augment"] = {{"flip_probability", c.augment.flip_probability},
                  {"scale_set", c.augment.scale_set},
                  {"crop_min_iou", c.augment.crop_min_iou},
                  {"crop_size", c.augment.crop_size},
                  {"crop_max_trials", c.augment.crop_max_trials},
                  {"brightness", {c.augment.brightness.lo, c.augment.brightness.hi}},
                  {"contrast", {c.augment.contrast.lo, c.augment.contrast.hi}},
                  {"saturation", {c.augment.saturation.lo, c.augment.saturation.hi}}};
  j["cascade"] = {{"pos_thresholds", c.cascade.pos_thresholds},
                  {"sampler", to_string(c.cascade.sampler)},
                  {"samples_per_image", c.cascade.samples_per_image},
                  {"positive_fraction", c.cascade.positive_fraction},
                  {"iou_bins", c.cascade.iou_bins},
                  {"refine_blend", c.cascade.refine_blend}};
  if (c.cascade.neg_thresholds) j["cascade"]["neg_thresholds"] = *c.cascade.neg_thresholds;
  j["schedule"] = {{"base_lr", c.schedule.base_lr},
                   {"warmup_ratio", c.schedule.warmup_ratio},
                   {"warmup_steps", c.schedule.warmup_steps},
                   {"batch_size", c.schedule.batch_size},
                   {"epochs", c.schedule.epochs},
                   {"grad_clip_max_norm", c.schedule.grad_clip_max_norm}};
  j["eval"] = {{"criterion", c.eval.criterion == MatchCriterion::Kind::IoU ? "iou" : "center_distance"},
               {"iou_tau", c.eval.iou_tau},
               {"distance", c.eval.distance},
               {"distance_unit", c.eval.distance_unit},
               {"averaging", c.eval.averaging == Averaging::Micro ? "micro" : "macro"},
               {"nms_threshold", c.eval.nms_threshold},
               {"score_threshold", c.eval.score_threshold}};
  if (c.eval.microns_per_pixel) j["eval"]["microns_per_pixel"] = *c.eval.microns_per_pixel;
  return j;
}

}  // namespace mitoforge
