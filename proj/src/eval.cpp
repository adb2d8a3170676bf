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

#include "mitoforge/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mitoforge/fs_util.hpp"

namespace mitoforge {

namespace {

using GroupKey = std::pair<std::string, int>;

std::vector<std::size_t> by_descending_score(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  return order;
}

double center_distance(const BBox& a, const BBox& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

}  // namespace

std::vector<Detection> suppress_duplicates(std::span<const Detection> detections,
                                           double nms_threshold) {
  std::vector<std::string> image_order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(detections[i].image_id);
    if (inserted) image_order.push_back(detections[i].image_id);
    it->second.push_back(i);
  }
  std::vector<Detection> out;
  for (const std::string& id : image_order) {
    const auto& members = groups[id];
    std::vector<ScoredBox> boxes;
    boxes.reserve(members.size());
    for (std::size_t i : members) {
      boxes.push_back({detections[i].box, detections[i].score, class_index(detections[i].label)});
    }
    for (std::size_t k : nms_indices(std::span<const ScoredBox>(boxes), nms_threshold)) {
      out.push_back(detections[members[k]]);
    }
  }
  return out;
}

std::vector<Detection> stitch_detections(std::span<const TileDetections> per_tile,
                                         double nms_threshold) {
  std::vector<Detection> global;
  for (const TileDetections& tile : per_tile) {
    for (Detection d : tile.detections) {
      d.box = d.box.translated(tile.origin.x, tile.origin.y);
      global.push_back(std::move(d));
    }
  }
  return suppress_duplicates(global, nms_threshold);
}

void validate(const MatchCriterion& criterion) {
  if (criterion.kind == MatchCriterion::Kind::IoU) {
    if (!(criterion.iou_tau >= 0.0 && criterion.iou_tau <= 1.0)) {
      throw InvalidArgument("match iou_tau must lie in [0, 1]");
    }
  } else if (!(criterion.max_distance >= 0.0) || !std::isfinite(criterion.max_distance)) {
    throw InvalidArgument("match distance must be >= 0");
  }
}

MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const Annotation> gts, const MatchCriterion& criterion) {
  validate(criterion);
  std::map<GroupKey, std::vector<std::size_t>> gt_groups;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_groups[{gts[g].image_id, class_index(gts[g].label)}].push_back(g);
  }

  MatchResult result;
  result.criterion = criterion;
  std::vector<bool> claimed(gts.size(), false);
  const bool use_iou = criterion.kind == MatchCriterion::Kind::IoU;

  for (std::size_t d : by_descending_score(detections)) {
    const Detection& det = detections[d];
    const auto it = gt_groups.find({det.image_id, class_index(det.label)});
    std::ptrdiff_t best = -1;
    double best_value = 0.0;
    if (it != gt_groups.end()) {
      for (std::size_t g : it->second) {
        if (claimed[g]) continue;
        if (use_iou) {
          const double v = iou(det.box, gts[g].box);
          if (v >= criterion.iou_tau && v > 0.0 && (best < 0 || v > best_value)) {
            best = static_cast<std::ptrdiff_t>(g);
            best_value = v;
          }
        } else {
          const double v = center_distance(det.box, gts[g].box);
          if (v <= criterion.max_distance && (best < 0 || v < best_value)) {
            best = static_cast<std::ptrdiff_t>(g);
            best_value = v;
          }
        }
      }
    }
    if (best >= 0) {
      claimed[static_cast<std::size_t>(best)] = true;
      result.pairs.emplace_back(d, static_cast<std::size_t>(best));
    } else {
      result.false_positives.push_back(d);
    }
  }
  std::sort(result.false_positives.begin(), result.false_positives.end());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!claimed[g]) result.false_negatives.push_back(g);
  }
  return result;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

PRF1 precision_recall_f1(const Counts& c) {
  PRF1 out;
  out.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 1.0;
  out.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

PRF1 precision_recall_f1(const MatchResult& match) {
  return precision_recall_f1(Counts{match.tp(), match.fp(), match.fn()});
}

PRCurve pr_curve(std::span<const Detection> detections, std::span<const Annotation> gts,
                 Label label, const MatchCriterion& criterion) {
  std::vector<Detection> dets;
  for (const Detection& d : detections) {
    if (d.label == label) dets.push_back(d);
  }
  std::vector<Annotation> truth;
  for (const Annotation& a : gts) {
    if (a.label == label) truth.push_back(a);
  }
  const MatchResult match = match_detections(dets, truth, criterion);
  std::vector<bool> is_tp(dets.size(), false);
  for (const auto& [d, g] : match.pairs) is_tp[d] = true;

  PRCurve curve;
  curve.label = label;
  const auto order = by_descending_score(dets);
  const double n_gt = static_cast<double>(truth.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (is_tp[order[k]]) ++tp;
    const bool group_end = k + 1 == order.size() || dets[order[k + 1]].score != dets[order[k]].score;
    if (!group_end) continue;
    const double kept = static_cast<double>(k + 1);
    curve.points.push_back({dets[order[k]].score, n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0,
                            static_cast<double>(tp) / kept});
  }
  return curve;
}

std::vector<PRCurve> pr_curves(std::span<const Detection> detections,
                               std::span<const Annotation> gts, const MatchCriterion& criterion) {
  std::vector<PRCurve> out;
  for (Label l : kAllLabels) out.push_back(pr_curve(detections, gts, l, criterion));
  return out;
}

double average_precision(const PRCurve& curve) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

std::pair<double, double> best_f1(const PRCurve& curve) {
  double best = 0.0;
  double thr = 0.0;
  for (const PRPoint& p : curve.points) {
    const double f = f1_score(p.precision, p.recall);
    if (f > best) {
      best = f;
      thr = p.threshold;
    }
  }
  return {best, thr};
}

void export_pr_csv(std::span<const PRCurve> curves, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "class,threshold,recall,precision\n";
    for (const PRCurve& c : curves) {
      for (const PRPoint& p : c.points) {
        out << to_string(c.label) << ',' << format_double(p.threshold) << ','
            << format_double(p.recall) << ',' << format_double(p.precision) << '\n';
      }
    }
  });
}

std::vector<PRCurve> load_pr_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "class,threshold,recall,precision") {
    throw IoError("unexpected PR CSV header in " + path.string());
  }
  auto parse = [&](std::string_view text, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    return v;
  };
  std::vector<PRCurve> curves;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      cells.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    cells.push_back(rest);
    if (cells.size() != 4) throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    const auto label = parse_label(cells[0]);
    if (!label) throw IoError(path.string() + ":" + std::to_string(line_no) + ": unknown class");
    if (curves.empty() || curves.back().label != *label) curves.push_back({*label, {}});
    curves.back().points.push_back(
        {parse(cells[1], line_no), parse(cells[2], line_no), parse(cells[3], line_no)});
  }
  return curves;
}

void export_pr_svg(std::span<const PRCurve> curves, const std::filesystem::path& path) {
  constexpr int kSize = 400;
  constexpr int kMargin = 40;
  const char* colors[] = {"#d62728", "#1f77b4"};
  write_file_atomic(path, [&](std::ostream& out) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin
        << "\" height=\"" << kSize + 2 * kMargin << "\">\n";
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize
        << "\" height=\"" << kSize << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (const PRCurve& c : curves) {
      out << "<polyline fill=\"none\" stroke=\"" << colors[class_index(c.label) % 2]
          << "\" stroke-width=\"2\" points=\"";
      for (const PRPoint& p : c.points) {
        out << kMargin + p.recall * kSize << ',' << kMargin + (1.0 - p.precision) * kSize << ' ';
      }
      out << "\"><title>" << to_string(c.label) << " AP=" << average_precision(c)
          << "</title></polyline>\n";
    }
    out << "</svg>\n";
  });
}

EvalReport evaluate(std::span<const Detection> detections, std::span<const Annotation> gts,
                    const EvalConfig& config) {
  validate(config.criterion);
  if (!(config.score_threshold >= 0.0 && config.score_threshold <= 1.0)) {
    throw InvalidArgument("score_threshold must lie in [0, 1]");
  }
  std::vector<Detection> dets = config.apply_nms
                                    ? suppress_duplicates(detections, config.nms_threshold)
                                    : std::vector<Detection>(detections.begin(), detections.end());

  EvalReport report;
  report.curves = pr_curves(dets, gts, config.criterion);

  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (d.score >= config.score_threshold) kept.push_back(d);
  }
  const MatchResult match = match_detections(kept, gts, config.criterion);

  std::set<std::string> images;
  for (const Annotation& a : gts) images.insert(a.image_id);
  for (const Detection& d : dets) images.insert(d.image_id);
  for (const std::string& id : images) {
    for (Label l : kAllLabels) report.per_image[id][l] = Counts{};
  }
  for (const auto& [d, g] : match.pairs) ++report.per_image[kept[d].image_id][kept[d].label].tp;
  for (std::size_t d : match.false_positives) ++report.per_image[kept[d].image_id][kept[d].label].fp;
  for (std::size_t g : match.false_negatives) ++report.per_image[gts[g].image_id][gts[g].label].fn;

  for (const PRCurve& curve : report.curves) {
    ClassReport cr;
    for (const auto& [id, by_label] : report.per_image) cr.counts += by_label.at(curve.label);
    const PRF1 m = precision_recall_f1(cr.counts);
    cr.precision = m.precision;
    cr.recall = m.recall;
    cr.f1 = m.f1;
    cr.ap = average_precision(curve);
    std::tie(cr.best_f1, cr.best_f1_threshold) = best_f1(curve);
    report.per_class[curve.label] = cr;
  }

  if (config.averaging == Averaging::Micro) {
    report.mean_f1 = report.per_class[Label::Mitosis].f1;
  } else {
    // Images without any mitosis ground truth or detection carry no signal.
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [id, by_label] : report.per_image) {
      const Counts& c = by_label.at(Label::Mitosis);
      if (c.tp + c.fp + c.fn == 0) continue;
      sum += precision_recall_f1(c).f1;
      ++n;
    }
    report.mean_f1 = n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
  return report;
}

}  // namespace mitoforge
