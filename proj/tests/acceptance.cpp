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


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "mitoforge/augment.hpp"
#include "mitoforge/cascade.hpp"
#include "mitoforge/eval.hpp"
#include "mitoforge/formats.hpp"
#include "mitoforge/fs_util.hpp"
#include "mitoforge/geometry.hpp"
#include "mitoforge/image.hpp"
#include "mitoforge/stain.hpp"
#include "mitoforge/tiling.hpp"
#include "oracles.hpp"
#include "synthetic_stain.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace mitoforge;
using testing::random_box;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

struct Criterion {
  std::string id;
  std::string name;
  double time_limit_ms;  // <= 0 means no limit
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome f1_consistency() {
  Outcome o;
  const double f1 = f1_score(0.7707, 0.7289);
  o.require(std::abs(f1 - 0.7492) <= 1e-4, "F1 = " + fmt(f1));
  if (o.pass) o.detail = "F1=" + fmt(f1);
  return o;
}

Outcome scale_set_derivation() {
  Outcome o;
  const auto s = scale_set(512, 64, 4);
  o.require(s == std::vector<int>{384, 448, 512, 576, 640}, "unexpected scale set");
  if (o.pass) o.detail = "{384, 448, 512, 576, 640}";
  return o;
}

Outcome warmup_endpoints() {
  Outcome o;
  const double a = warmup_lr(0, 0.01, 0.001, 500);
  const double b = warmup_lr(500, 0.01, 0.001, 500);
  o.require(a == 1e-5, "lr(0) = " + fmt(a));
  o.require(b == 0.01, "lr(500) = " + fmt(b));
  if (o.pass) o.detail = "lr(0)=1e-05 lr(500)=0.01";
  return o;
}

Outcome macenko_recovery() {
  Outcome o;
  Rng rng(20260101);
  double worst_angle = 0.0;
  int worst_level = 0;
  int over_bound = 0;
  int true_basis_over_bound = 0;
  for (int t = 0; t < 100; ++t) {
    const auto v = testing::random_stain_matrix(rng);
    const auto c = testing::random_concentrations(rng, 64 * 64);
    const StainBasis got = estimate_stain_basis(testing::make_od_image(v, c, 64));
    const double angle = testing::max_column_angle(got.stain_vectors, v);
    worst_angle = std::max(worst_angle, angle);
    o.require(angle <= 1e-2, "image " + std::to_string(t) + " angle " + fmt(angle));

    const ImagePatch rgb = testing::synthetic_patch(v, c, 64);
    const StainBasis own = estimate_stain_basis(rgb_to_od(rgb));
    const int level = testing::max_level_diff(normalize_to_reference(rgb, own), rgb);
    worst_level = std::max(worst_level, level);
    over_bound += level > 2;
    o.require(level <= 2, "image " + std::to_string(t) + " self-normalization off by " +
                              std::to_string(level));

    // Same round trip through the generating basis, to separate estimation
    // error from 8-bit quantization of dark pixels.
    StainBasis truth = own;
    truth.stain_vectors = v;
    ODImage projected = rgb_to_od(rgb);
    projected.values = v * stain_concentrations(projected, truth);
    true_basis_over_bound += testing::max_level_diff(od_to_rgb(projected), rgb) > 2;
  }
  const std::string summary = "max angle " + fmt(worst_angle) + " rad, max level diff " +
                              std::to_string(worst_level) + ", " + std::to_string(over_bound) +
                              "/100 images beyond 2 levels (" +
                              std::to_string(true_basis_over_bound) +
                              "/100 with the generating basis)";
  o.detail = o.pass ? summary : o.detail + "; " + summary;
  return o;
}

Outcome nms_oracle() {
  Outcome o;
  Rng rng(5150);
  for (int t = 0; t < 1000 && o.pass; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 8));
    std::vector<ScoredBox> in;
    for (std::size_t i = 0; i < n; ++i) {
      in.push_back({testing::random_int_box(rng, 40, 20), double(rng.uniform_int(0, 4)) / 4.0,
                    static_cast<int>(rng.uniform_int(0, 1))});
    }
    const double thr = rng.uniform01();
    const auto got = nms_indices(std::span<const ScoredBox>(in), thr);
    o.require(got == testing::nms_fixed_point_oracle(in, thr), "instance " + std::to_string(t));
  }
  if (o.pass) o.detail = "1000/1000 instances equal";
  return o;
}

Outcome ap_oracle() {
  Outcome o;
  Rng rng(6160);
  double worst = 0.0;
  for (int t = 0; t < 500 && o.pass; ++t) {
    std::vector<Annotation> g;
    const auto n_gt = rng.uniform_int(0, 6);
    for (int i = 0; i < n_gt; ++i) g.push_back({random_box(rng, 80.0, 6.0, 20.0), Label::Mitosis, "img"});
    std::vector<Detection> d;
    const auto n = rng.uniform_int(0, 20);
    for (int i = 0; i < n; ++i) {
      BBox b = random_box(rng, 80.0, 6.0, 20.0);
      if (!g.empty() && rng.bernoulli(0.6)) {
        b = g[rng.uniform_index(g.size())].box.translated(rng.uniform(-4, 4), rng.uniform(-4, 4));
      }
      d.push_back({b, Label::Mitosis, double(rng.uniform_int(1, 12)) / 12.0, "img"});
    }
    const double ap = average_precision(pr_curve(d, g, Label::Mitosis, MatchCriterion::by_iou(0.5)));
    const double err = std::abs(ap - testing::brute_force_ap(d, g, 0.5));
    worst = std::max(worst, err);
    o.require(err <= 1e-12, "instance " + std::to_string(t) + " off by " + fmt(err));
  }
  if (o.pass) o.detail = "max abs error " + fmt(worst);
  return o;
}

Outcome cascade_monotonicity() {
  Outcome o;
  Rng rng(7170);
  std::vector<CascadeStageConfig> stages(3);
  const double thr[3] = {0.5, 0.6, 0.7};
  for (int s = 0; s < 3; ++s) stages[s].iou_pos_threshold = stages[s].iou_neg_threshold = thr[s];
  int snapped = 0;
  for (int t = 0; t < 200 && o.pass; ++t) {
    std::vector<BBox> gts, props;
    const auto n_gt = rng.uniform_int(0, 5);
    for (int g = 0; g < n_gt; ++g) gts.push_back(random_box(rng, 200.0, 8.0, 40.0));
    const auto n = rng.uniform_int(1, 80);
    for (int i = 0; i < n; ++i) {
      if (!gts.empty() && rng.bernoulli(0.7)) {
        const BBox& g = gts[rng.uniform_index(gts.size())];
        const double j = g.width() * 0.3;
        props.push_back({g.x_min + rng.uniform(-j, j), g.y_min + rng.uniform(-j, j),
                         g.x_max + rng.uniform(-j, j), g.y_max + rng.uniform(-j, j)});
      } else {
        props.push_back(random_box(rng, 200.0, 4.0, 40.0));
      }
    }
    const auto fixed = run_cascade(props, gts, stages, 0.0, rng);
    for (std::size_t s = 1; s < 3; ++s) {
      o.require(fixed.stages[s].positives <= fixed.stages[s - 1].positives,
                "instance " + std::to_string(t) + " positives increase at stage " + std::to_string(s));
    }
    const auto refined = run_cascade(props, gts, stages, 1.0, rng);
    for (std::size_t s = 1; s < 3; ++s) {
      const auto& cur = refined.stages[s];
      for (std::size_t i = 0; i < cur.assignment.size(); ++i) {
        if (cur.assignment[i].status != ProposalStatus::Positive) continue;
        const BBox& g = gts[static_cast<std::size_t>(cur.assignment[i].gt_index)];
        o.require(iou(cur.proposals[i], g) == 1.0,
                  "instance " + std::to_string(t) + " stage " + std::to_string(s) + " IoU " +
                      fmt(iou(cur.proposals[i], g)));
        ++snapped;
      }
    }
  }
  if (o.pass) o.detail = "200 instances, " + std::to_string(snapped) + " refined positives at IoU 1";
  return o;
}

Outcome focal_gradient() {
  Outcome o;
  double worst = 0.0;
  for (double gamma : {0.0, 1.0, 2.0, 5.0}) {
    for (int k = 1; k <= 99; ++k) {
      const double p = k / 100.0;
      const double h = 1e-4 * std::min(p, 1.0 - p);
      const double fd = (focal_loss(p + h, gamma).loss - focal_loss(p - h, gamma).loss) / (2 * h);
      const double rel = std::abs(focal_loss(p, gamma).grad - fd) / std::abs(fd);
      worst = std::max(worst, rel);
      o.require(rel <= 1e-6, "p=" + fmt(p) + " gamma=" + fmt(gamma) + " rel " + fmt(rel));
      if (gamma == 0.0) {
        const double ce = -std::log(p);
        o.require(std::abs(focal_loss(p, 0.0).loss - ce) <= 1e-12, "gamma 0 differs from CE at p=" + fmt(p));
      }
    }
  }
  if (o.pass) o.detail = "max relative error " + fmt(worst);
  return o;
}

Outcome tiling_coverage() {
  Outcome o;
  Rng rng(9190);
  for (int t = 0; t < 300 && o.pass; ++t) {
    const int tile = static_cast<int>(rng.uniform_int(1, 64));
    const int w = static_cast<int>(rng.uniform_int(tile, 300));
    const int h = static_cast<int>(rng.uniform_int(tile, 300));
    const int stride = static_cast<int>(rng.uniform_int(1, tile));
    const TileGrid g = build_tile_grid({w, h}, tile, stride);
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(w) * h, 0);
    for (const Origin& og : g.origins) {
      for (int y = og.y; y < og.y + tile; ++y) {
        std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(y) * w + og.x, tile, 1);
      }
    }
    o.require(std::count(covered.begin(), covered.end(), 0) == 0,
              std::to_string(w) + "x" + std::to_string(h) + " tile " + std::to_string(tile) +
                  " stride " + std::to_string(stride) + " leaves pixels uncovered");
  }
  const auto n = build_tile_grid({2048, 1536}, 512, 512).origins.size();
  o.require(n == 12, "2048x1536 gives " + std::to_string(n) + " tiles");
  if (o.pass) o.detail = "300 random grids covered, 2048x1536 -> 12 tiles";
  return o;
}

// The crop origin is not returned, so it is recovered by locating the
// emitted pixels in the source patch.
std::optional<std::pair<int, int>> find_crop_origin(const ImagePatch& src, const ImagePatch& crop) {
  const int size = crop.width();
  for (int y = 0; y + size <= src.height(); ++y) {
    for (int x = 0; x + size <= src.width(); ++x) {
      if (src.crop(x, y, size, 1) == crop.crop(0, 0, size, 1) && src.crop(x, y, size, size) == crop) {
        return std::pair{x, y};
      }
    }
  }
  return std::nullopt;
}

Outcome crop_retention() {
  Outcome o;
  Rng rng(10200);
  int cropped = 0;
  std::size_t boxes = 0;
  for (int t = 0; t < 1000 && o.pass; ++t) {
    Sample s{testing::random_patch(rng, 96, 96), {}};
    const auto n = rng.uniform_int(1, 6);
    for (int k = 0; k < n; ++k) s.boxes.push_back({random_box(rng, 96, 4.0, 24.0), Label::Mitosis});
    const int size = static_cast<int>(rng.uniform_int(16, 95));
    const Sample c = min_iou_random_crop(s, size, 0.3, rng);
    if (c.patch.width() == 96) {
      o.require(c.boxes.size() == s.boxes.size(), "fallback changed the boxes");
      continue;
    }
    ++cropped;
    const auto origin = find_crop_origin(s.patch, c.patch);
    o.require(origin.has_value(), "trial " + std::to_string(t) + ": crop window not found");
    if (!origin) break;
    for (const LabeledBox& e : c.boxes) {
      const BBox global = e.box.translated(origin->first, origin->second);
      bool explained = false;
      for (const LabeledBox& src : s.boxes) {
        const BBox window{double(origin->first), double(origin->second),
                          double(origin->first + size), double(origin->second + size)};
        const auto clipped = clip_to_region(src.box, window);
        if (!clipped || iou(src.box, *clipped) < 0.3) continue;
        if (std::abs(clipped->x_min - global.x_min) < 1e-9 &&
            std::abs(clipped->y_min - global.y_min) < 1e-9 &&
            std::abs(clipped->x_max - global.x_max) < 1e-9 &&
            std::abs(clipped->y_max - global.y_max) < 1e-9) {
          explained = true;
        }
      }
      o.require(explained, "trial " + std::to_string(t) + ": emitted box violates the rule");
      ++boxes;
    }
  }
  o.require(cropped > 0, "no trial produced a crop");
  if (o.pass) {
    o.detail = std::to_string(cropped) + " crops, " + std::to_string(boxes) + " emitted boxes checked";
  }
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return files;
}

std::string box_json(const BBox& b) {
  return "[" + format_double(b.x_min) + "," + format_double(b.y_min) + "," + format_double(b.x_max) +
         "," + format_double(b.y_max) + "]";
}

Outcome pipeline_determinism() {
  Outcome o;
  using testing::shell_quote;
  testing::TempDir dir("acceptance");
  const auto q = [](const fs::path& p) { return shell_quote(p.string()); };

  Rng rng(11210);
  std::string gts, dets;
  for (int i = 0; i < 8; ++i) {
    const BBox g = random_box(rng, 1000.0, 30.0, 60.0);
    const char* label = i % 3 ? "mitosis" : "hard_negative";
    gts += std::string(i ? "," : "") + R"({"bbox": )" + box_json(g) + R"(, "label": ")" + label + "\"}";
    const BBox d = g.translated(rng.uniform(-5, 5), rng.uniform(-5, 5));
    dets += std::string(i ? "," : "") + R"({"bbox": )" + box_json(d) + R"(, "label": ")" + label +
            R"(", "score": )" + format_double(rng.uniform01()) + "}";
  }
  write_png(dir / "hpf.png", testing::random_patch(rng, 1024, 1024));
  write_text_atomic(dir / "hpf.json",
                    R"({"image_id": "hpf", "width": 1024, "height": 1024, "annotations": [)" + gts + "]}");
  write_text_atomic(dir / "dets.json", R"({"image_id": "hpf", "detections": [)" + dets + "]}");

  for (const std::string run : {"run1", "run2"}) {
    const fs::path out = dir / run;
    const std::string steps[] = {
        "--seed 7 tile --image " + q(dir / "hpf.png") + " --annotations " + q(dir / "hpf.json") +
            " --stride 256 --keep-empty --output " + q(out / "tiles"),
        "--seed 7 split --manifest " + q(out / "tiles" / "manifest.jsonl") +
            " --train-fraction 0.6 --output " + q(out / "split"),
        "--seed 7 --jobs 4 augment --copies 2 --manifest " + q(out / "split" / "train.jsonl") +
            " --patches " + q(out / "tiles") + " --output " + q(out / "aug"),
        "--seed 7 evaluate --detections " + q(dir / "dets.json") + " --gts " + q(dir / "hpf.json") +
            " --output " + q(out / "eval.json") + " --pr-csv " + q(out / "pr.csv"),
    };
    for (const std::string& step : steps) {
      const auto r = testing::run_cli(step, dir.path());
      o.require(r.exit_code == 0, run + " step failed: " + r.err);
      if (!o.pass) return o;
    }
  }
  const auto a = snapshot(dir / "run1");
  const auto b = snapshot(dir / "run2");
  o.require(a.size() == b.size() && a.size() > 20, "artifact sets differ");
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    o.require(it != b.end() && it->second == bytes, name + " differs between runs");
  }

  std::vector<PatchRecord> records(4985);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].image_id = "hpf" + std::to_string(i / 12);
    records[i].origin = {static_cast<int>(i % 4) * 512, static_cast<int>(i % 12 / 4) * 512};
  }
  write_text_atomic(dir / "all.jsonl", to_manifest(records));
  for (const std::string run : {"s1", "s2"}) {
    const auto r = testing::run_cli("--seed 3 split --manifest " + q(dir / "all.jsonl") +
                                        " --train-count 3072 --val-count 1913 --output " + q(dir / run),
                                    dir.path());
    o.require(r.exit_code == 0, "count split failed: " + r.err);
    if (!o.pass) return o;
  }
  const auto train = load_manifest(dir / "s1" / "train.jsonl");
  const auto val = load_manifest(dir / "s1" / "val.jsonl");
  o.require(train.size() == 3072 && val.size() == 1913,
            "split sizes " + std::to_string(train.size()) + "/" + std::to_string(val.size()));
  o.require(snapshot(dir / "s1") == snapshot(dir / "s2"), "count split differs between runs");
  if (o.pass) o.detail = std::to_string(a.size()) + " artifacts identical, split 3072/1913";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "f1_consistency", 1.0, f1_consistency},
      {"AC2", "scale_set", 0.0, scale_set_derivation},
      {"AC3", "warmup_endpoints", 0.0, warmup_endpoints},
      {"AC4", "macenko_recovery", 10000.0, macenko_recovery},
      {"AC5", "nms_oracle", 5000.0, nms_oracle},
      {"AC6", "ap_oracle", 5000.0, ap_oracle},
      {"AC7", "cascade_monotonicity", 0.0, cascade_monotonicity},
      {"AC8", "focal_gradient", 0.0, focal_gradient},
      {"AC9", "tiling_coverage", 0.0, tiling_coverage},
      {"AC10", "crop_retention", 0.0, crop_retention},
      {"AC11", "pipeline_determinism", 0.0, pipeline_determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_ms > 0 && ms >= c.time_limit_ms) {
      out.pass = false;
      out.detail = "took " + fmt(ms) + " ms, limit " + fmt(c.time_limit_ms) + " ms";
    }
    failures += !out.pass;
    std::printf("%s %s %s (%.3f ms): %s\n", out.pass ? "PASS" : "FAIL", c.id.c_str(), c.name.c_str(),
                ms, out.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
