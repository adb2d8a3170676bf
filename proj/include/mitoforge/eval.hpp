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

#ifndef MITOFORGE_EVAL_HPP
#define MITOFORGE_EVAL_HPP

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mitoforge/annotation.hpp"
#include "mitoforge/tiling.hpp"

namespace mitoforge {

struct Detection {
  BBox box;
  Label label{Label::Mitosis};
  double score = 0.0;
  std::string image_id;
};

/// Detections of one tile, in tile-local coordinates.
struct TileDetections {
  Origin origin;
  std::vector<Detection> detections;
};

/// Shifts every detection into the global frame, then applies class-wise
/// NMS within each image. Output groups images by first appearance, each in
/// descending score order.
std::vector<Detection> stitch_detections(std::span<const TileDetections> per_tile,
                                         double nms_threshold = 0.5);

/// Class-wise NMS within each image_id.
std::vector<Detection> suppress_duplicates(std::span<const Detection> detections,
                                           double nms_threshold = 0.5);

/// When a detection may claim a ground-truth object.
struct MatchCriterion {
  enum class Kind { IoU, CenterDistance };
  Kind kind = Kind::IoU;
  /// Minimum IoU (inclusive) for Kind::IoU.
  double iou_tau = 0.5;
  /// Maximum center distance in pixels (inclusive) for Kind::CenterDistance.
  double max_distance = 0.0;

  static MatchCriterion by_iou(double tau) { return {Kind::IoU, tau, 0.0}; }
  static MatchCriterion by_distance(double pixels) { return {Kind::CenterDistance, 0.5, pixels}; }
};

void validate(const MatchCriterion& criterion);

struct MatchResult {
  /// (detection index, gt index) into the inputs of match_detections.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> false_positives;
  std::vector<std::size_t> false_negatives;
  MatchCriterion criterion;

  std::size_t tp() const { return pairs.size(); }
  std::size_t fp() const { return false_positives.size(); }
  std::size_t fn() const { return false_negatives.size(); }
};

/// Greedy matching within each (image_id, label) group. Detections are
/// visited by descending score, ties by input index; each claims its best
/// unclaimed gt that satisfies the criterion (highest IoU or nearest
/// center, ties by lowest gt index).
MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const Annotation> gts, const MatchCriterion& criterion);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct PRF1 {
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Harmonic mean of precision and recall, 0 when both are 0.
double f1_score(double precision, double recall);

/// Precision is 1 with no detections; recall is 0 with no ground truth.
PRF1 precision_recall_f1(const Counts& counts);
PRF1 precision_recall_f1(const MatchResult& match);

struct PRPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  Label label{Label::Mitosis};
  /// One point per distinct score, from the highest threshold down.
  std::vector<PRPoint> points;
};

/// Curve of one class. Greedy matching only looks at higher-ranked
/// detections, so the matching at each threshold is a prefix of the full
/// matching and a single pass yields every point.
PRCurve pr_curve(std::span<const Detection> detections, std::span<const Annotation> gts,
                 Label label, const MatchCriterion& criterion);

/// Both classes, in label order.
std::vector<PRCurve> pr_curves(std::span<const Detection> detections,
                               std::span<const Annotation> gts, const MatchCriterion& criterion);

/// All-point interpolated AP: sum over points of the recall increment times
/// the highest precision at that recall or beyond. 0 for an empty curve.
double average_precision(const PRCurve& curve);

/// Highest F1 along the curve and the threshold that attains it.
std::pair<double, double> best_f1(const PRCurve& curve);

/// CSV with header "class,threshold,recall,precision", values written with
/// round-trip precision.
void export_pr_csv(std::span<const PRCurve> curves, const std::filesystem::path& path);
std::vector<PRCurve> load_pr_csv(const std::filesystem::path& path);

/// Simple SVG plot of the curves (recall on x, precision on y).
void export_pr_svg(std::span<const PRCurve> curves, const std::filesystem::path& path);

enum class Averaging { Micro, Macro };

struct EvalConfig {
  MatchCriterion criterion;
  /// Score cut for the fixed-threshold precision / recall / F1.
  double score_threshold = 0.5;
  double nms_threshold = 0.5;
  bool apply_nms = true;
  Averaging averaging = Averaging::Micro;
};

struct ClassReport {
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ap = 0.0;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  Counts counts;
};

struct EvalReport {
  std::map<Label, ClassReport> per_class;
  /// Mitosis-class F1 across images: pooled counts (micro) or the mean of
  /// per-image F1 (macro).
  double mean_f1 = 0.0;
  /// Per image, per class counts at the fixed score threshold.
  std::map<std::string, std::map<Label, Counts>> per_image;
  std::vector<PRCurve> curves;
};

EvalReport evaluate(std::span<const Detection> detections, std::span<const Annotation> gts,
                    const EvalConfig& config);

}  // namespace mitoforge

#endif  // MITOFORGE_EVAL_HPP
