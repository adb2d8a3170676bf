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

#ifndef MITOFORGE_CONFIG_HPP
#define MITOFORGE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mitoforge/augment.hpp"
#include "mitoforge/cascade.hpp"
#include "mitoforge/eval.hpp"
#include "mitoforge/formats.hpp"
#include "mitoforge/stain.hpp"

namespace mitoforge {

struct StainSection {
  double beta = 0.15;
  double alpha = 1.0;
  double concentration_percentile = 99.0;
  std::size_t min_tissue_pixels = 100;
  std::string reference_basis_path;
};

struct TilingSection {
  int tile_size = 512;
  /// Defaults to tile_size (non-overlapping).
  std::optional<int> stride;
  double min_visible_iou = 0.3;
  bool keep_empty = false;
};

struct CascadeSection {
  std::vector<double> pos_thresholds{0.5, 0.6, 0.7};
  /// Defaults to pos_thresholds (no ignore band).
  std::optional<std::vector<double>> neg_thresholds;
  Sampler sampler = Sampler::Random;
  std::size_t samples_per_image = 512;
  double positive_fraction = 0.25;
  int iou_bins = 3;
  double refine_blend = 0.5;

  std::vector<CascadeStageConfig> stages() const;
};

struct ScheduleSection {
  double base_lr = 0.01;
  double warmup_ratio = 0.001;
  long long warmup_steps = 500;
  int batch_size = 4;
  int epochs = 50;
  double grad_clip_max_norm = 35.0;
};

struct EvalSection {
  MatchCriterion::Kind criterion = MatchCriterion::Kind::IoU;
  double iou_tau = 0.5;
  double distance = 30.0;
  /// "pixels" or "microns"; microns need microns_per_pixel.
  std::string distance_unit = "pixels";
  std::optional<double> microns_per_pixel;
  Averaging averaging = Averaging::Micro;
  double nms_threshold = 0.5;
  double score_threshold = 0.5;

  MatchCriterion match_criterion() const;
  EvalConfig eval_config() const;
};

/// Every tunable of the pipeline. Defaults:
/// 512 px tiles, NMS at 0.5, 0.3 minimum crop IoU, 0.001 / 500 step linear
/// warmup to a 0.01 learning rate, batch size 4.
struct PipelineConfig {
  double io = 255.0;
  StainSection stain;
  TilingSection tiling;
  AugmentConfig augment;
  CascadeSection cascade;
  ScheduleSection schedule;
  EvalSection eval;
  std::uint64_t seed = 0;
  int jobs = 1;

  MacenkoParams macenko_params() const;
};

/// Throws ConfigError naming the offending field path.
void validate(const PipelineConfig& config);

/// Overlays `j` onto `base`. Unknown keys and wrongly typed values are
/// ConfigErrors.
PipelineConfig config_from_json(const Json& j, PipelineConfig base = {});

/// TOML (.toml) or JSON (anything else). The result is validated.
PipelineConfig load_config(const std::filesystem::path& path);

Json to_json(const PipelineConfig& config);

}  // namespace mitoforge

#endif  // MITOFORGE_CONFIG_HPP
