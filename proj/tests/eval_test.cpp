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


#include <gtest/gtest.h>

#include <fstream>

#include "mitoforge/eval.hpp"
#include "mitoforge/fs_util.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace mitoforge {
namespace {

using testing::random_box;

Detection det(BBox b, double score, Label l = Label::Mitosis, std::string id = "img") {
  return {b, l, score, std::move(id)};
}

Annotation gt(BBox b, Label l = Label::Mitosis, std::string id = "img") {
  return {b, l, std::move(id)};
}

TEST(StitchTest, Examples) {
  const std::vector<TileDetections> one{{{0, 0}, {det({1, 1, 5, 5}, 0.7)}}};
  const auto out = stitch_detections(one);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].box, (BBox{1, 1, 5, 5}));

  // same global box (300,300,320,320) seen from tiles at 0 and 256
  const std::vector<TileDetections> two{{{0, 0}, {det({300, 300, 320, 320}, 0.9)}},
                                        {{256, 256}, {det({44, 44, 64, 64}, 0.8)}}};
  const auto merged = stitch_detections(two);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].score, 0.9);

  const std::vector<TileDetections> classes{
      {{0, 0}, {det({0, 0, 9, 9}, 0.9), det({0, 0, 9, 9}, 0.8, Label::HardNegative)}}};
  EXPECT_EQ(stitch_detections(classes).size(), 2u);
}

TEST(StitchTest, NoSameClassOverlapAfterwards) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<TileDetections> tiles;
    for (int k = 0; k < 4; ++k) {
      TileDetections td{{int(rng.uniform_int(0, 3)) * 64, int(rng.uniform_int(0, 3)) * 64}, {}};
      for (int i = 0; i < 8; ++i) {
        td.detections.push_back(det(random_box(rng, 128.0, 4.0, 30.0), rng.uniform01(),
                                    rng.bernoulli(0.5) ? Label::Mitosis : Label::HardNegative));
      }
      tiles.push_back(td);
    }
    const auto out = stitch_detections(tiles);
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[i].label == out[j].label) {
          EXPECT_LE(iou(out[i].box, out[j].box), 0.5);
        }
      }
    }
  }
}

TEST(MatchTest, Examples) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10})};
  auto m = match_detections(std::vector<Detection>{det({0, 0, 10, 10}, 0.5)}, g, MatchCriterion{});
  EXPECT_EQ(m.tp(), 1u);
  EXPECT_EQ(m.fp(), 0u);
  EXPECT_EQ(m.fn(), 0u);

  const std::vector<Detection> two{det({1, 0, 11, 10}, 0.8), det({0, 0, 10, 10}, 0.9)};
  m = match_detections(two, g, MatchCriterion{});
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].first, 1u);  // higher score wins even though listed second
  EXPECT_EQ(m.false_positives, (std::vector<std::size_t>{0}));

  m = match_detections(std::vector<Detection>{}, g, MatchCriterion{});
  EXPECT_EQ(m.fn(), 1u);
  const PRF1 empty = precision_recall_f1(m);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
}

TEST(MatchTest, PerClassAndImage) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10}, Label::Mitosis, "a")};
  const std::vector<Detection> d{det({0, 0, 10, 10}, 0.9, Label::HardNegative, "a"),
                                 det({0, 0, 10, 10}, 0.9, Label::Mitosis, "b")};
  const auto m = match_detections(d, g, MatchCriterion{});
  EXPECT_EQ(m.tp(), 0u);
  EXPECT_EQ(m.fp(), 2u);
}

TEST(MatchTest, CenterDistance) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10})};
  const std::vector<Detection> d{det({3, 4, 13, 14}, 0.9)};  // centers 5 apart
  EXPECT_EQ(match_detections(d, g, MatchCriterion::by_distance(5.0)).tp(), 1u);
  EXPECT_EQ(match_detections(d, g, MatchCriterion::by_distance(4.99)).tp(), 0u);
  EXPECT_THROW(match_detections(d, g, MatchCriterion::by_distance(-1.0)), InvalidArgument);
  EXPECT_THROW(match_detections(d, g, MatchCriterion::by_iou(1.5)), InvalidArgument);
}

TEST(MatchTest, CountIdentitiesAndOrderInvariance) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<Annotation> g;
    std::vector<Detection> d;
    for (int i = 0; i < rng.uniform_int(0, 8); ++i) g.push_back(gt(random_box(rng, 60.0, 5.0, 25.0)));
    for (int i = 0; i < rng.uniform_int(0, 10); ++i) d.push_back(det(random_box(rng, 60.0, 5.0, 25.0), 0.5));
    const auto m = match_detections(d, g, MatchCriterion::by_iou(0.3));
    EXPECT_EQ(m.tp() + m.fn(), g.size());
    EXPECT_EQ(m.tp() + m.fp(), d.size());
    std::set<std::size_t> ds, gs;
    for (auto [a, b] : m.pairs) {
      EXPECT_TRUE(ds.insert(a).second);
      EXPECT_TRUE(gs.insert(b).second);
    }
    EXPECT_EQ(match_detections(d, g, MatchCriterion::by_iou(0.3)).pairs, m.pairs);
  }
}

TEST(PRF1Test, Examples) {
  EXPECT_NEAR(f1_score(0.7707, 0.7289), 0.7492, 1e-4);
  const PRF1 z = precision_recall_f1(Counts{});
  EXPECT_EQ(z.precision, 1.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  EXPECT_EQ(f1_score(0.5, 0.5), 0.5);
  const PRF1 c = precision_recall_f1(Counts{3, 1, 2});
  EXPECT_DOUBLE_EQ(c.precision, 0.75);
  EXPECT_DOUBLE_EQ(c.recall, 0.6);
  EXPECT_DOUBLE_EQ(c.f1, 2 * 0.75 * 0.6 / 1.35);
}

TEST(PRF1Test, Bounds) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const double p = rng.uniform01(), r = rng.uniform01();
    const double f = f1_score(p, r);
    EXPECT_LE(f, std::min(2 * p, 2 * r) + 1e-15);
    EXPECT_LE(f, std::max(p, r) + 1e-15);
  }
  EXPECT_EQ(f1_score(0.0, 0.7), 0.0);
  EXPECT_EQ(f1_score(0.7, 0.0), 0.0);
}

TEST(PRCurveTest, Examples) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10})};
  auto c = pr_curve(std::vector<Detection>{det({0, 0, 10, 10}, 0.6)}, g, Label::Mitosis, {});
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_EQ(c.points[0].recall, 1.0);
  EXPECT_EQ(c.points[0].precision, 1.0);

  const std::vector<Detection> d{det({0, 0, 10, 10}, 0.8), det({50, 50, 60, 60}, 0.9)};
  c = pr_curve(d, g, Label::Mitosis, {});
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[0].threshold, 0.9);
  EXPECT_EQ(c.points[0].recall, 0.0);
  EXPECT_EQ(c.points[0].precision, 0.0);
  EXPECT_EQ(c.points[1].recall, 1.0);
  EXPECT_EQ(c.points[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(average_precision(c), 0.5);
  EXPECT_EQ(best_f1(c), (std::pair<double, double>{2.0 / 3.0, 0.8}));
}

TEST(PRCurveTest, TiedScoresShareAPoint) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10}), gt({20, 0, 30, 10})};
  const std::vector<Detection> d{det({0, 0, 10, 10}, 0.5), det({20, 0, 30, 10}, 0.5)};
  const auto c = pr_curve(d, g, Label::Mitosis, {});
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_EQ(c.points[0].recall, 1.0);
  EXPECT_EQ(average_precision(c), 1.0);
}

TEST(APTest, PerfectAndEmpty) {
  EXPECT_EQ(average_precision(PRCurve{}), 0.0);
  std::vector<Annotation> g;
  std::vector<Detection> d;
  for (int i = 0; i < 5; ++i) {
    g.push_back(gt({i * 20.0, 0, i * 20.0 + 10, 10}));
    d.push_back(det(g.back().box, 0.9 - 0.1 * i));
  }
  d.push_back(det({200, 200, 210, 210}, 0.05));
  EXPECT_EQ(average_precision(pr_curve(d, g, Label::Mitosis, {})), 1.0);
}

std::vector<Detection> random_dets(Rng& rng, const std::vector<Annotation>& g, int n) {
  std::vector<Detection> d;
  for (int i = 0; i < n; ++i) {
    BBox b = random_box(rng, 80.0, 6.0, 20.0);
    if (!g.empty() && rng.bernoulli(0.6)) {
      const BBox& t = g[rng.uniform_index(g.size())].box;
      b = t.translated(rng.uniform(-4, 4), rng.uniform(-4, 4));
    }
    d.push_back(det(b, double(rng.uniform_int(1, 12)) / 12.0));  // coarse scores create ties
  }
  return d;
}

TEST(APTest, MatchesBruteForce) {
  Rng rng(4);
  for (int t = 0; t < 300; ++t) {
    std::vector<Annotation> g;
    for (int i = 0; i < rng.uniform_int(0, 6); ++i) g.push_back(gt(random_box(rng, 80.0, 6.0, 20.0)));
    const auto d = random_dets(rng, g, static_cast<int>(rng.uniform_int(0, 20)));
    const auto curve = pr_curve(d, g, Label::Mitosis, MatchCriterion::by_iou(0.5));
    EXPECT_NEAR(average_precision(curve), testing::brute_force_ap(d, g, 0.5), 1e-12);
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
      EXPECT_GE(curve.points[k].recall, curve.points[k - 1].recall);
      EXPECT_LT(curve.points[k].threshold, curve.points[k - 1].threshold);
    }
    for (const PRPoint& p : curve.points) {
      EXPECT_GE(p.precision, 0.0);
      EXPECT_LE(p.precision, 1.0);
      EXPECT_LE(p.recall, 1.0);
    }
  }
}

TEST(APTest, InvariantToMonotoneRescaling) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<Annotation> g;
    for (int i = 0; i < 4; ++i) g.push_back(gt(random_box(rng, 80.0, 6.0, 20.0)));
    auto d = random_dets(rng, g, 15);
    const double ap = average_precision(pr_curve(d, g, Label::Mitosis, {}));
    for (Detection& x : d) x.score = std::sqrt(x.score) * 0.5;
    EXPECT_EQ(average_precision(pr_curve(d, g, Label::Mitosis, {})), ap);
  }
}

TEST(PRExportTest, CsvRoundTrip) {
  testing::TempDir dir("pr");
  Rng rng(6);
  std::vector<Annotation> g;
  for (int i = 0; i < 5; ++i) g.push_back(gt(random_box(rng, 80.0, 6.0, 20.0)));
  const auto d = random_dets(rng, g, 12);
  const auto curves = pr_curves(d, g, {});
  export_pr_csv(curves, dir / "pr.csv");
  const auto back = load_pr_csv(dir / "pr.csv");
  ASSERT_EQ(back.size(), 1u);  // no hard-negative detections, so no rows for that class
  EXPECT_EQ(back[0].points.size(), curves[0].points.size());
  EXPECT_NEAR(average_precision(back[0]), average_precision(curves[0]), 1e-12);
  for (std::size_t k = 0; k < back[0].points.size(); ++k) {
    EXPECT_EQ(back[0].points[k].threshold, curves[0].points[k].threshold);
    EXPECT_EQ(back[0].points[k].precision, curves[0].points[k].precision);
  }

  const std::vector<PRCurve> empty{PRCurve{}};
  export_pr_csv(empty, dir / "empty.csv");
  EXPECT_EQ(read_text_file(dir / "empty.csv"), "class,threshold,recall,precision\n");

  export_pr_svg(curves, dir / "pr.svg");
  EXPECT_NE(read_text_file(dir / "pr.svg").find("<polyline"), std::string::npos);
  EXPECT_THROW(export_pr_csv(curves, dir / "missing_dir" / "x.csv"), IoError);
}

// Hand-built fixture: two images, both classes, one duplicate that NMS
// removes and one sub-threshold detection.
TEST(EvaluateTest, GoldenFixture) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10}, Label::Mitosis, "a"),
                                  gt({50, 50, 60, 60}, Label::Mitosis, "a"),
                                  gt({0, 0, 10, 10}, Label::Mitosis, "b"),
                                  gt({30, 30, 40, 40}, Label::HardNegative, "b")};
  const std::vector<Detection> d{
      det({0, 0, 10, 10}, 0.95, Label::Mitosis, "a"),     // TP
      det({0, 0, 10, 9}, 0.90, Label::Mitosis, "a"),      // NMS duplicate of the above
      det({80, 80, 90, 90}, 0.70, Label::Mitosis, "a"),   // FP
      det({50, 50, 60, 60}, 0.30, Label::Mitosis, "a"),   // below score threshold
      det({1, 0, 11, 10}, 0.60, Label::Mitosis, "b"),     // TP (IoU 9/11)
      det({30, 30, 40, 40}, 0.80, Label::HardNegative, "b")};  // TP
  EvalConfig cfg;
  const EvalReport r = evaluate(d, g, cfg);
  const ClassReport& m = r.per_class.at(Label::Mitosis);
  EXPECT_EQ(m.counts.tp, 2u);
  EXPECT_EQ(m.counts.fp, 1u);
  EXPECT_EQ(m.counts.fn, 1u);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.mean_f1, 2.0 / 3.0);
  // ranked mitosis list after NMS: TP .95, FP .70, TP .60, TP .30; the
  // precision envelope is 1 up to recall 1/3 and 0.75 beyond
  EXPECT_DOUBLE_EQ(m.ap, 1.0 / 3.0 + 0.75 * (2.0 / 3.0));
  EXPECT_DOUBLE_EQ(m.best_f1, 2.0 * 0.75 * 1.0 / 1.75);
  EXPECT_EQ(m.best_f1_threshold, 0.30);
  const ClassReport& h = r.per_class.at(Label::HardNegative);
  EXPECT_EQ(h.f1, 1.0);
  EXPECT_EQ(r.per_image.at("a").at(Label::Mitosis).fp, 1u);
  EXPECT_EQ(r.per_image.at("b").at(Label::HardNegative).tp, 1u);

  // macro: image a has P=1/2,R=1/2 -> 0.5; image b has F1 1 -> mean 0.75
  cfg.averaging = Averaging::Macro;
  EXPECT_DOUBLE_EQ(evaluate(d, g, cfg).mean_f1, 0.75);
}

TEST(EvaluateTest, EmptyAndPerfect) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10}), gt({20, 0, 30, 10}, Label::HardNegative)};
  const EvalReport none = evaluate(std::vector<Detection>{}, g, {});
  EXPECT_EQ(none.per_class.at(Label::Mitosis).recall, 0.0);
  EXPECT_EQ(none.mean_f1, 0.0);
  const std::vector<Detection> d{det({0, 0, 10, 10}, 0.9), det({20, 0, 30, 10}, 0.9, Label::HardNegative)};
  const EvalReport all = evaluate(d, g, {});
  EXPECT_EQ(all.mean_f1, 1.0);
  EXPECT_EQ(all.per_class.at(Label::HardNegative).f1, 1.0);
}

TEST(EvaluateTest, ImagesWithoutDetectionsGetZeroCounts) {
  const std::vector<Annotation> g{gt({0, 0, 10, 10}, Label::Mitosis, "only_gt")};
  const std::vector<Detection> d{det({0, 0, 10, 10}, 0.9, Label::Mitosis, "only_det")};
  const EvalReport r = evaluate(d, g, {});
  EXPECT_EQ(r.per_image.at("only_gt").at(Label::Mitosis).fn, 1u);
  EXPECT_EQ(r.per_image.at("only_det").at(Label::Mitosis).fp, 1u);
  EXPECT_EQ(r.per_image.at("only_gt").at(Label::HardNegative).tp, 0u);
}

}  // namespace
}  // namespace mitoforge
