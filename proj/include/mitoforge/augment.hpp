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

#ifndef MITOFORGE_AUGMENT_HPP
#define MITOFORGE_AUGMENT_HPP

#include <utility>
#include <vector>

#include "mitoforge/annotation.hpp"
#include "mitoforge/image.hpp"
#include "mitoforge/random.hpp"

namespace mitoforge {

struct JitterRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  std::vector<int> scale_set{384, 448, 512, 576, 640};
  double crop_min_iou = 0.3;
  int crop_size = 448;
  int crop_max_trials = 50;
  JitterRange brightness{-0.125, 0.125};
  JitterRange contrast{-0.25, 0.25};
  JitterRange saturation{-0.25, 0.25};
};

void validate(const AugmentConfig& config);

/// Patch pixels together with the boxes that live on them.
struct Sample {
  ImagePatch patch;
  std::vector<LabeledBox> boxes;
};

/// {base - k*step, ..., base, ..., base + k*step} with k = count / 2.
std::vector<int> scale_set(int base = 512, int step = 64, int count = 4);

enum class FlipAxis { Horizontal, Vertical };

Sample flip(const Sample& in, FlipAxis axis);

/// Bilinear resample to target x target; box coordinates scale per axis.
Sample rescale(const Sample& in, int target);

/// Bounding-box-aware random crop of side `crop_size`.
///
/// A box survives a candidate crop when the IoU between the box and its
/// crop-clipped part is at least `min_iou`. The first of `max_trials`
/// uniformly drawn crops that keeps at least one box is returned with the
/// surviving (clipped) boxes in crop coordinates; otherwise the input is
/// returned unchanged.
Sample min_iou_random_crop(const Sample& in, int crop_size, double min_iou, Rng& rng,
                           int max_trials = 50);

/// Brightness, then contrast about the per-channel mean, then luma-preserving
/// saturation. Factors are drawn in that order from the configured ranges.
ImagePatch color_contrast_jitter(const ImagePatch& patch, const AugmentConfig& config, Rng& rng);

/// Full training-time chain: random horizontal and vertical flips, min-IoU
/// crop, rescale to a random member of the scale set, color jitter.
Sample augment(const Sample& in, const AugmentConfig& config, Rng& rng);

}  // namespace mitoforge

#endif  // MITOFORGE_AUGMENT_HPP
