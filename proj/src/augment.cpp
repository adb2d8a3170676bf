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

#include "mitoforge/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace mitoforge {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_range(const JitterRange& r, const char* name) {
  if (!(r.lo >= -1.0 && r.hi <= 1.0 && r.lo <= r.hi)) {
    throw InvalidArgument(std::string(name) + " jitter range must satisfy -1 <= lo <= hi <= 1");
  }
}

std::uint8_t to_level(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

void validate(const AugmentConfig& config) {
  if (!in_unit(config.flip_probability)) throw InvalidArgument("flip_probability must lie in [0, 1]");
  if (!in_unit(config.crop_min_iou)) throw InvalidArgument("crop_min_iou must lie in [0, 1]");
  if (config.scale_set.empty()) throw InvalidArgument("scale_set must not be empty");
  for (int s : config.scale_set) {
    if (s <= 0) throw InvalidArgument("scale_set entries must be positive");
  }
  if (config.crop_size <= 0) throw InvalidArgument("crop_size must be positive");
  if (config.crop_max_trials <= 0) throw InvalidArgument("crop_max_trials must be positive");
  check_range(config.brightness, "brightness");
  check_range(config.contrast, "contrast");
  check_range(config.saturation, "saturation");
}

std::vector<int> scale_set(int base, int step, int count) {
  if (count < 0 || count % 2 != 0) throw InvalidArgument("scale count must be even and >= 0");
  if (count > 0 && step <= 0) throw InvalidArgument("scale step must be positive");
  const int half = count / 2;
  if (base - half * step <= 0) {
    throw InvalidArgument("scale set would contain a non-positive size");
  }
  std::vector<int> sizes;
  for (int k = -half; k <= half; ++k) sizes.push_back(base + k * step);
  return sizes;
}

Sample flip(const Sample& in, FlipAxis axis) {
  const ImagePatch& src = in.patch;
  const int w = src.width();
  const int h = src.height();
  Sample out{ImagePatch(w, h), {}};
  out.patch.set_microns_per_pixel(src.microns_per_pixel());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = axis == FlipAxis::Horizontal ? w - 1 - x : x;
      const int sy = axis == FlipAxis::Vertical ? h - 1 - y : y;
      for (int c = 0; c < 3; ++c) out.patch.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  out.boxes.reserve(in.boxes.size());
  for (const LabeledBox& lb : in.boxes) {
    BBox b = lb.box;
    if (axis == FlipAxis::Horizontal) {
      b = {w - lb.box.x_max, lb.box.y_min, w - lb.box.x_min, lb.box.y_max};
    } else {
      b = {lb.box.x_min, h - lb.box.y_max, lb.box.x_max, h - lb.box.y_min};
    }
    out.boxes.push_back({b, lb.label});
  }
  return out;
}

Sample rescale(const Sample& in, int target) {
  if (target <= 0) throw InvalidArgument("rescale target must be positive");
  const ImagePatch& src = in.patch;
  const int w = src.width();
  const int h = src.height();
  const double fx = static_cast<double>(w) / target;
  const double fy = static_cast<double>(h) / target;

  Sample out{ImagePatch(target, target), {}};
  if (const auto& mpp = src.microns_per_pixel()) out.patch.set_microns_per_pixel(*mpp * fx);
  for (int y = 0; y < target; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = sy - y0;
    for (int x = 0; x < target; ++x) {
      const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c);
        const double bottom = (1.0 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c);
        out.patch.at(x, y, c) = to_level((1.0 - wy) * top + wy * bottom);
      }
    }
  }

  const BBox frame{0.0, 0.0, static_cast<double>(target), static_cast<double>(target)};
  for (const LabeledBox& lb : in.boxes) {
    const BBox scaled{lb.box.x_min * target / w, lb.box.y_min * target / h,
                      lb.box.x_max * target / w, lb.box.y_max * target / h};
    if (auto clipped = clip_to_region(scaled, frame)) out.boxes.push_back({*clipped, lb.label});
  }
  return out;
}

Sample min_iou_random_crop(const Sample& in, int crop_size, double min_iou, Rng& rng,
                           int max_trials) {
  const int w = in.patch.width();
  const int h = in.patch.height();
  if (crop_size <= 0 || crop_size > w || crop_size > h) {
    throw InvalidArgument("crop_size must lie in (0, min(width, height)]");
  }
  if (!in_unit(min_iou)) throw InvalidArgument("min_iou must lie in [0, 1]");

  for (int trial = 0; trial < max_trials; ++trial) {
    const int x = static_cast<int>(rng.uniform_int(0, w - crop_size));
    const int y = static_cast<int>(rng.uniform_int(0, h - crop_size));
    const BBox window{static_cast<double>(x), static_cast<double>(y),
                      static_cast<double>(x + crop_size), static_cast<double>(y + crop_size)};
    std::vector<LabeledBox> kept;
    for (const LabeledBox& lb : in.boxes) {
      const auto clipped = clip_to_region(lb.box, window);
      if (!clipped || iou(lb.box, *clipped) < min_iou) continue;
      kept.push_back({clipped->translated(-x, -y), lb.label});
    }
    if (!kept.empty()) return {in.patch.crop(x, y, crop_size, crop_size), std::move(kept)};
  }
  return in;
}

ImagePatch color_contrast_jitter(const ImagePatch& patch, const AugmentConfig& config, Rng& rng) {
  const double delta = rng.uniform(config.brightness.lo, config.brightness.hi);
  const double gamma = rng.uniform(config.contrast.lo, config.contrast.hi);
  const double sat = rng.uniform(config.saturation.lo, config.saturation.hi);

  const std::size_t n = patch.pixel_count();
  const auto src = patch.data();
  std::vector<double> px(src.begin(), src.end());

  // Zero factors are skipped so that identity settings stay bit-exact.
  if (delta != 0.0) {
    for (double& v : px) v = std::clamp(v + delta * 255.0, 0.0, 255.0);
  }

  if (gamma != 0.0) {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) mean[c] += px[3 * i + c];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        double& v = px[3 * i + c];
        v = std::clamp(mean[c] + (1.0 + gamma) * (v - mean[c]), 0.0, 255.0);
      }
    }
  }

  if (sat != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double* p = &px[3 * i];
      const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      for (int c = 0; c < 3; ++c) {
        p[c] = std::clamp(luma + (1.0 + sat) * (p[c] - luma), 0.0, 255.0);
      }
    }
  }

  ImagePatch out(patch.width(), patch.height());
  out.set_microns_per_pixel(patch.microns_per_pixel());
  auto dst = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) dst[i] = to_level(px[i]);
  return out;
}

Sample augment(const Sample& in, const AugmentConfig& config, Rng& rng) {
  validate(config);
  Sample s = in;
  if (rng.bernoulli(config.flip_probability)) s = flip(s, FlipAxis::Horizontal);
  if (rng.bernoulli(config.flip_probability)) s = flip(s, FlipAxis::Vertical);
  const int crop = std::min({config.crop_size, s.patch.width(), s.patch.height()});
  s = min_iou_random_crop(s, crop, config.crop_min_iou, rng, config.crop_max_trials);
  const int target = config.scale_set[rng.uniform_index(config.scale_set.size())];
  s = rescale(s, target);
  s.patch = color_contrast_jitter(s.patch, config, rng);
  return s;
}

}  // namespace mitoforge
