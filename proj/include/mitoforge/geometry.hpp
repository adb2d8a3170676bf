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

#ifndef MITOFORGE_GEOMETRY_HPP
#define MITOFORGE_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitoforge/error.hpp"

namespace mitoforge {

/// Axis-aligned box stored as real-valued corners.
///
/// Area is (x_max - x_min) * (y_max - y_min); there is no +1 pixel term.
template <typename Scalar>
struct Box {
  Scalar x_min{0};
  Scalar y_min{0};
  Scalar x_max{0};
  Scalar y_max{0};

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return width() * height(); }
  Scalar center_x() const { return (x_min + x_max) / Scalar(2); }
  Scalar center_y() const { return (y_min + y_max) / Scalar(2); }

  /// Finite corners and strictly positive extent on both axes.
  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  Box translated(Scalar dx, Scalar dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  bool contains(const Box& other) const {
    return x_min <= other.x_min && y_min <= other.y_min && other.x_max <= x_max &&
           other.y_max <= y_max;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

using BBox = Box<double>;

/// Builds a box, throwing InvalidArgument if it violates the invariants.
template <typename Scalar>
Box<Scalar> make_box(Scalar x_min, Scalar y_min, Scalar x_max, Scalar y_max) {
  Box<Scalar> b{x_min, y_min, x_max, y_max};
  if (!b.valid()) {
    throw InvalidArgument("box must have finite corners with x_min < x_max and y_min < y_max");
  }
  return b;
}

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  return w * h;
}

/// Intersection over union; symmetric, 1 for identical boxes, 0 when disjoint.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  if (inter <= Scalar(0)) return Scalar(0);
  const Scalar uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Intersection of `box` with `region`, or nullopt if it has no area.
template <typename Scalar>
std::optional<Box<Scalar>> clip_to_region(const Box<Scalar>& box, const Box<Scalar>& region) {
  Box<Scalar> out{std::max(box.x_min, region.x_min), std::max(box.y_min, region.y_min),
                  std::min(box.x_max, region.x_max), std::min(box.y_max, region.y_max)};
  if (!(out.x_min < out.x_max && out.y_min < out.y_max)) return std::nullopt;
  return out;
}

template <typename Scalar>
struct ScoredBoxT {
  Box<Scalar> box;
  Scalar score{0};
  int class_id{0};
};

using ScoredBox = ScoredBoxT<double>;

/// Greedy class-wise non-maximum suppression, returning indices into
/// `candidates` in descending score order.
///
/// Equal scores keep input order. A lower-ranked box is suppressed when its
/// IoU with a kept box of the same class is strictly greater than
/// `iou_threshold`.
template <typename Scalar>
std::vector<std::size_t> nms_indices(std::span<const ScoredBoxT<Scalar>> candidates,
                                     Scalar iou_threshold) {
  if (!(iou_threshold >= Scalar(0) && iou_threshold <= Scalar(1))) {
    throw InvalidArgument("nms iou_threshold must lie in [0, 1]");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return candidates[i].score > candidates[j].score;
  });

  std::vector<std::size_t> kept;
  kept.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& cand = candidates[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return candidates[k].class_id == cand.class_id &&
             iou(candidates[k].box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

template <typename Scalar>
std::vector<ScoredBoxT<Scalar>> nms(std::span<const ScoredBoxT<Scalar>> candidates,
                                    Scalar iou_threshold) {
  std::vector<ScoredBoxT<Scalar>> out;
  for (std::size_t idx : nms_indices(candidates, iou_threshold)) out.push_back(candidates[idx]);
  return out;
}

template <typename Scalar>
std::vector<ScoredBoxT<Scalar>> nms(const std::vector<ScoredBoxT<Scalar>>& candidates,
                                    Scalar iou_threshold) {
  return nms(std::span<const ScoredBoxT<Scalar>>(candidates), iou_threshold);
}

}  // namespace mitoforge

#endif  // MITOFORGE_GEOMETRY_HPP
