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

#include <cmath>
#include <numeric>

#include "mitoforge/stain.hpp"
#include "synthetic_stain.hpp"
#include "test_support.hpp"

namespace mitoforge {
namespace {

using testing::make_od_image;
using testing::max_column_angle;
using testing::max_level_diff;
using testing::random_concentrations;
using testing::random_stain_matrix;
using testing::synthetic_patch;

TEST(OpticalDensityTest, Examples) {
  ImagePatch p(2, 1, 255);
  p.at(1, 0, 0) = p.at(1, 0, 1) = p.at(1, 0, 2) = 26;
  const ODImage od = rgb_to_od(p);
  EXPECT_EQ(od.values.col(0), Eigen::Vector3d::Zero());
  EXPECT_NEAR(od.values(0, 1), -std::log10(26.0 / 255.0), 1e-15);
  EXPECT_NEAR(od.values(0, 1), 0.9915, 1e-4);

  ODImage ones;
  ones.width = 1;
  ones.height = 1;
  ones.values = Eigen::Matrix<double, 3, Eigen::Dynamic>::Ones(3, 1);
  const ImagePatch back = od_to_rgb(ones);
  EXPECT_EQ(back.at(0, 0, 0), 26);  // 25.5 rounds up
  ones.values.setZero();
  EXPECT_EQ(od_to_rgb(ones).at(0, 0, 2), 255);
}

TEST(OpticalDensityTest, ZeroIntensityIsFinite) {
  const ImagePatch black(1, 1, 0);
  const ODImage od = rgb_to_od(black);
  EXPECT_NEAR(od.values(0, 0), std::log10(255.0), 1e-12);
}

TEST(OpticalDensityTest, RejectsNonPositiveIo) {
  const ImagePatch p(1, 1, 10);
  EXPECT_THROW(rgb_to_od(p, 0.0), InvalidArgument);
  EXPECT_THROW(rgb_to_od(p, -3.0), InvalidArgument);
  EXPECT_THROW(od_to_rgb(rgb_to_od(p), 0.0), InvalidArgument);
}

TEST(OpticalDensityTest, RoundTrip) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const ImagePatch p = testing::random_patch(rng, 17, 9, 1, 255);
    EXPECT_LE(max_level_diff(od_to_rgb(rgb_to_od(p)), p), 1);
    EXPECT_LE(max_level_diff(od_to_rgb(rgb_to_od<float>(p, 255.0f), 255.0f), p), 1);
  }
}

TEST(StainConcentrationsTest, Examples) {
  Rng rng(1);
  StainBasis basis;
  basis.stain_vectors = random_stain_matrix(rng);
  Eigen::Matrix<double, 3, Eigen::Dynamic> od(3, 2);
  od.col(0) = basis.stain_vectors.col(0);
  od.col(1).setZero();
  const auto c = stain_concentrations(od, basis);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(c(1, 0), 0.0, 1e-9);
  EXPECT_EQ(c(0, 1), 0.0);
  EXPECT_EQ(c(1, 1), 0.0);
}

TEST(StainConcentrationsTest, RecoversForwardConstruction) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    StainBasis basis;
    basis.stain_vectors = random_stain_matrix(rng);
    const auto truth = random_concentrations(rng, 64);
    const auto got = stain_concentrations(basis.stain_vectors * truth, basis);
    EXPECT_LT((got - truth).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(StainConcentrationsTest, ClampsNegatives) {
  Rng rng(2);
  StainBasis basis;
  basis.stain_vectors = random_stain_matrix(rng);
  const Eigen::Vector3d od = 2.0 * basis.stain_vectors.col(0) - 0.5 * basis.stain_vectors.col(1);
  const auto c = stain_concentrations(od, basis);
  EXPECT_EQ(c(1, 0), 0.0);
  EXPECT_NEAR(c(0, 0), 2.0, 1e-9);
}

TEST(StainBasisTest, ValidateRejectsSingularBasis) {
  StainBasis basis;
  basis.stain_vectors.col(0) = Eigen::Vector3d(0.6, 0.7, 0.3).normalized();
  basis.stain_vectors.col(1) = basis.stain_vectors.col(0);
  basis.max_concentrations << 1.0, 1.0;
  EXPECT_THROW(validate(basis), SingularBasis);
  EXPECT_THROW(stain_concentrations(Eigen::Vector3d(0.1, 0.2, 0.3), basis), SingularBasis);
  basis.stain_vectors.col(1) << 0.0, 1.0, 0.0;
  EXPECT_NO_THROW(validate(basis));
  basis.stain_vectors.col(1) << 0.0, 2.0, 0.0;
  EXPECT_THROW(validate(basis), SingularBasis);
}

TEST(EstimateStainBasisTest, RecoversSyntheticBasis) {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    const auto truth = random_stain_matrix(rng);
    const ODImage od = make_od_image(truth, random_concentrations(rng, 64 * 64), 64);
    const StainBasis got = estimate_stain_basis(od);
    EXPECT_LT(max_column_angle(got.stain_vectors, truth), 1e-2);
    // column order: larger blue OD first
    EXPECT_LT(angle_between(got.stain_vectors.col(0), truth.col(0)), 1e-2);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(got.stain_vectors.col(k).norm(), 1.0, 1e-9);
      EXPECT_GE(got.stain_vectors.col(k).minCoeff(), 0.0);
      EXPECT_GT(got.max_concentrations(k), 0.0);
    }
  }
}

TEST(EstimateStainBasisTest, PermutationInvariantExactly) {
  Rng rng(77);
  const auto truth = random_stain_matrix(rng);
  ODImage od = make_od_image(truth, random_concentrations(rng, 40 * 40), 40);
  const StainBasis a = estimate_stain_basis(od);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(od.values.cols()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  rng.shuffle(std::span<Eigen::Index>(perm));
  ODImage shuffled = od;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.values.col(static_cast<Eigen::Index>(i)) = od.values.col(perm[i]);
  }
  const StainBasis b = estimate_stain_basis(shuffled);
  EXPECT_EQ(a.stain_vectors, b.stain_vectors);
  EXPECT_EQ(a.max_concentrations, b.max_concentrations);
}

TEST(EstimateStainBasisTest, WhiteImageIsDegenerate) {
  const ImagePatch white(32, 32, 255);
  EXPECT_THROW(estimate_stain_basis(rgb_to_od(white)), DegenerateTissue);
}

TEST(EstimateStainBasisTest, SingleStainIsDegenerate) {
  Rng rng(4);
  const auto v = random_stain_matrix(rng);
  auto c = random_concentrations(rng, 32 * 32);
  c.row(1).setZero();
  EXPECT_THROW(estimate_stain_basis(make_od_image(v, c, 32)), DegenerateTissue);
}

TEST(EstimateStainBasisTest, TooFewTissuePixels) {
  Rng rng(6);
  const auto v = random_stain_matrix(rng);
  auto c = random_concentrations(rng, 20 * 20);
  c.rightCols(20 * 20 - 50).setZero();
  const ODImage od = make_od_image(v, c, 20);
  EXPECT_THROW(estimate_stain_basis(od), DegenerateTissue);
  MacenkoParams relaxed;
  relaxed.min_tissue_pixels = 10;
  EXPECT_NO_THROW(estimate_stain_basis(od, relaxed));
}

TEST(EstimateStainBasisTest, RejectsBadParams) {
  MacenkoParams p;
  p.alpha = 50.0;
  EXPECT_THROW(estimate_stain_basis(ODImage{}, p), InvalidArgument);
}

TEST(NormalizeTest, SelfReferenceIsNearIdentity) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const ImagePatch p =
        synthetic_patch(random_stain_matrix(rng), random_concentrations(rng, 48 * 48), 48);
    const StainBasis own = estimate_stain_basis(rgb_to_od(p));
    EXPECT_LE(max_level_diff(normalize_to_reference(p, own), p), 2);
  }
}

TEST(NormalizeTest, WhiteStaysWhite) {
  Rng rng(13);
  auto c = random_concentrations(rng, 48 * 48);
  c.col(0).setZero();
  const ImagePatch p = synthetic_patch(random_stain_matrix(rng), c, 48);
  ASSERT_EQ(p.at(0, 0, 0), 255);
  StainBasis ref;
  ref.stain_vectors = random_stain_matrix(rng);
  ref.max_concentrations << 0.9, 0.7;
  const ImagePatch out = normalize_to_reference(p, ref);
  for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(out.at(0, 0, ch), 255);
}

TEST(NormalizeTest, DifferentBasesSameConcentrationsAgree) {
  Rng rng(14);
  for (int t = 0; t < 10; ++t) {
    const auto c = random_concentrations(rng, 48 * 48, 0.8);
    const ImagePatch a = synthetic_patch(random_stain_matrix(rng), c, 48);
    const ImagePatch b = synthetic_patch(random_stain_matrix(rng), c, 48);
    StainBasis ref;
    ref.stain_vectors = random_stain_matrix(rng);
    ref.max_concentrations << 0.8, 0.6;
    EXPECT_LE(max_level_diff(normalize_to_reference(a, ref), normalize_to_reference(b, ref)), 2);
  }
}

TEST(NormalizeTest, Idempotent) {
  Rng rng(15);
  const ImagePatch p =
      synthetic_patch(random_stain_matrix(rng), random_concentrations(rng, 48 * 48), 48);
  StainBasis ref;
  ref.stain_vectors = random_stain_matrix(rng);
  ref.max_concentrations << 0.9, 0.7;
  const ImagePatch once = normalize_to_reference(p, ref);
  EXPECT_LE(max_level_diff(normalize_to_reference(once, ref), once), 2);
}

TEST(NormalizeTest, PropagatesDegenerate) {
  StainBasis ref;
  ref.stain_vectors << 0.65, 0.07, 0.70, 0.99, 0.29, 0.11;
  ref.stain_vectors.colwise().normalize();
  ref.max_concentrations << 1.0, 1.0;
  EXPECT_THROW(normalize_to_reference(ImagePatch(16, 16, 255), ref), DegenerateTissue);
}

TEST(PercentileTest, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{3, 1, 2, 4}, 50.0), 2.5);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{0, 10}, 99.0), 9.9);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{5}, 1.0), 5.0);
  EXPECT_THROW(percentile(std::vector<double>{}, 1.0), InvalidArgument);
}

}  // namespace
}  // namespace mitoforge
