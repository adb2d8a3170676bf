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

#ifndef MITOFORGE_STAIN_HPP
#define MITOFORGE_STAIN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mitoforge/error.hpp"
#include "mitoforge/image.hpp"

namespace mitoforge {

/// Optical densities of a patch, one column per pixel in row-major order.
template <typename Scalar>
struct ODImageT {
  int width = 0;
  int height = 0;
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> values;

  Eigen::Index pixel_count() const { return values.cols(); }
};

using ODImage = ODImageT<double>;

/// Two unit-norm, nonnegative stain directions in OD space and the 99th
/// percentile concentration of each. Column 0 is the hematoxylin-like stain.
template <typename Scalar>
struct StainBasisT {
  Eigen::Matrix<Scalar, 3, 2> stain_vectors = Eigen::Matrix<Scalar, 3, 2>::Zero();
  Eigen::Matrix<Scalar, 2, 1> max_concentrations = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar io = Scalar(255);
};

using StainBasis = StainBasisT<double>;

struct MacenkoParams {
  double io = 255.0;
  /// Pixels whose OD components are all below beta are treated as background.
  double beta = 0.15;
  /// Angular percentile (and 100 - alpha) picking the two extreme directions.
  double alpha = 1.0;
  double concentration_percentile = 99.0;
  std::size_t min_tissue_pixels = 100;
  double min_stain_angle = 1e-3;
};

inline void validate(const MacenkoParams& p) {
  if (!(p.io > 0.0)) throw InvalidArgument("io must be > 0");
  if (!(p.beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  if (!(p.alpha >= 0.0 && p.alpha < 50.0)) throw InvalidArgument("alpha must lie in [0, 50)");
  if (!(p.concentration_percentile > 0.0 && p.concentration_percentile <= 100.0)) {
    throw InvalidArgument("concentration_percentile must lie in (0, 100]");
  }
}

/// Angle in radians between two nonzero vectors.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar angle_between(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  using std::atan2;
  return atan2(a.cross(b).norm(), a.dot(b));
}

/// Linear-interpolated percentile (q in [0, 100]) of an unsorted sample.
template <typename Scalar>
Scalar percentile(std::vector<Scalar> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(lo));
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Beer-Lambert conversion OD = -log10(max(I, 1) / io), floored at 0.
template <typename Scalar = double>
ODImageT<Scalar> rgb_to_od(const ImagePatch& patch, Scalar io = Scalar(255)) {
  if (!(io > Scalar(0))) throw InvalidArgument("io must be > 0");
  // Lookup per intensity level; every pixel maps through one of 256 values.
  std::array<Scalar, 256> table{};
  for (int level = 0; level < 256; ++level) {
    const Scalar intensity = static_cast<Scalar>(std::max(level, 1));
    table[level] = std::max(Scalar(0), -std::log10(intensity / io));
  }
  ODImageT<Scalar> od;
  od.width = patch.width();
  od.height = patch.height();
  od.values.resize(3, static_cast<Eigen::Index>(patch.pixel_count()));
  const auto px = patch.data();
  for (Eigen::Index i = 0; i < od.values.cols(); ++i) {
    for (int c = 0; c < 3; ++c) od.values(c, i) = table[px[3 * i + c]];
  }
  return od;
}

/// Inverse conversion I = round(io * 10^-OD), clamped to [0, 255].
template <typename Scalar>
ImagePatch od_to_rgb(const ODImageT<Scalar>& od, Scalar io = Scalar(255)) {
  if (!(io > Scalar(0))) throw InvalidArgument("io must be > 0");
  if (od.values.cols() != static_cast<Eigen::Index>(od.width) * od.height) {
    throw InvalidArgument("OD matrix does not match image dimensions");
  }
  ImagePatch out(od.width, od.height);
  auto px = out.data();
  for (Eigen::Index i = 0; i < od.values.cols(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const Scalar v = std::round(io * std::pow(Scalar(10), -od.values(c, i)));
      px[3 * i + c] = static_cast<std::uint8_t>(std::clamp(v, Scalar(0), Scalar(255)));
    }
  }
  return out;
}

/// Throws SingularBasis unless the columns are unit-norm, nonnegative and
/// separated by more than `min_angle` radians.
template <typename Scalar>
void validate(const StainBasisT<Scalar>& basis, double min_angle = 1e-3) {
  const auto& v = basis.stain_vectors;
  for (int k = 0; k < 2; ++k) {
    if (!v.col(k).allFinite() || std::abs(v.col(k).norm() - Scalar(1)) > Scalar(1e-9)) {
      throw SingularBasis("stain vector " + std::to_string(k) + " is not unit-norm");
    }
    if ((v.col(k).array() < Scalar(0)).any()) {
      throw SingularBasis("stain vector " + std::to_string(k) + " has a negative component");
    }
  }
  const Eigen::Matrix<Scalar, 3, 1> a = v.col(0);
  const Eigen::Matrix<Scalar, 3, 1> b = v.col(1);
  if (!(angle_between(a, b) > static_cast<Scalar>(min_angle))) {
    throw SingularBasis("stain vectors are collinear");
  }
}

/// Least-squares unmixing of OD columns against the stain vectors, with
/// negative concentrations clamped to zero. Returns a 2 x N matrix.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> stain_concentrations(
    const Eigen::MatrixBase<Derived>& od, const StainBasisT<Scalar>& basis) {
  static_assert(Derived::RowsAtCompileTime == 3 || Derived::RowsAtCompileTime == Eigen::Dynamic);
  validate(basis);
  const auto& v = basis.stain_vectors;
  const Eigen::Matrix<Scalar, 2, 2> normal = v.transpose() * v;
  const Eigen::Matrix<Scalar, 2, 3> pseudo_inverse = normal.inverse() * v.transpose();
  return (pseudo_inverse * od).cwiseMax(Scalar(0));
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> stain_concentrations(const ODImageT<Scalar>& od,
                                                              const StainBasisT<Scalar>& basis) {
  return stain_concentrations(od.values, basis);
}

namespace detail {

/// Tissue columns (any component >= beta), sorted lexicographically so that
/// downstream floating-point reductions do not depend on pixel order.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, Eigen::Dynamic> tissue_pixels(
    const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& od, Scalar beta) {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(od.cols()));
  for (Eigen::Index i = 0; i < od.cols(); ++i) {
    if (od.col(i).maxCoeff() >= beta) keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (int c = 0; c < 3; ++c) {
      if (od(c, a) != od(c, b)) return od(c, a) < od(c, b);
    }
    return false;
  });
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> out(3, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = od.col(keep[j]);
  return out;
}

/// Maps an in-plane direction into the positive orthant and unit-normalizes.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> to_stain_direction(Eigen::Matrix<Scalar, 3, 1> v) {
  if (v.sum() < Scalar(0)) v = -v;
  v = v.cwiseMax(Scalar(0));
  const Scalar n = v.norm();
  if (!(n > Scalar(0))) throw DegenerateTissue("stain direction vanished after sign correction");
  return v / n;
}

}  // namespace detail

/// Macenko stain basis estimation.
///
/// Background pixels are dropped, the retained OD vectors are projected onto
/// their two leading principal directions, and the alpha / (100 - alpha)
/// percentile polar angles in that plane give the two stain vectors.
template <typename Scalar>
StainBasisT<Scalar> estimate_stain_basis(const ODImageT<Scalar>& od,
                                         const MacenkoParams& params = {}) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  validate(params);

  const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> tissue =
      detail::tissue_pixels(od.values, static_cast<Scalar>(params.beta));
  const Eigen::Index n = tissue.cols();
  if (n < static_cast<Eigen::Index>(std::max<std::size_t>(params.min_tissue_pixels, 2))) {
    throw DegenerateTissue("only " + std::to_string(n) + " tissue pixels above OD threshold");
  }

  const Vec3 mean = tissue.rowwise().mean();
  const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> centered = tissue.colwise() - mean;
  const Mat3 cov = centered * centered.transpose() / static_cast<Scalar>(n - 1);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateTissue("OD covariance eigensolve failed");

  // Eigenvalues ascend; the plane is spanned by the last two eigenvectors.
  Eigen::Matrix<Scalar, 3, 2> plane;
  plane.col(0) = solver.eigenvectors().col(2);
  plane.col(1) = solver.eigenvectors().col(1);
  if (plane.col(0).dot(mean) < Scalar(0)) plane.col(0) = -plane.col(0);

  const Eigen::Matrix<Scalar, 2, Eigen::Dynamic> projected = plane.transpose() * tissue;
  std::vector<Scalar> angles(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    angles[static_cast<std::size_t>(i)] = std::atan2(projected(1, i), projected(0, i));
  }
  const Scalar phi_lo = percentile(angles, params.alpha);
  const Scalar phi_hi = percentile(angles, 100.0 - params.alpha);

  const Vec3 v_lo = detail::to_stain_direction<Scalar>(
      plane * Eigen::Matrix<Scalar, 2, 1>(std::cos(phi_lo), std::sin(phi_lo)));
  const Vec3 v_hi = detail::to_stain_direction<Scalar>(
      plane * Eigen::Matrix<Scalar, 2, 1>(std::cos(phi_hi), std::sin(phi_hi)));
  if (!(angle_between(v_lo, v_hi) > static_cast<Scalar>(params.min_stain_angle))) {
    throw DegenerateTissue("percentile stain directions coincide (single-stain image)");
  }

  StainBasisT<Scalar> basis;
  basis.io = static_cast<Scalar>(params.io);
  // Hematoxylin absorbs more in the blue channel than eosin.
  const bool lo_is_hematoxylin = v_lo(2) >= v_hi(2);
  basis.stain_vectors.col(0) = lo_is_hematoxylin ? v_lo : v_hi;
  basis.stain_vectors.col(1) = lo_is_hematoxylin ? v_hi : v_lo;

  const Eigen::Matrix<Scalar, 2, Eigen::Dynamic> conc = stain_concentrations(tissue, basis);
  for (int k = 0; k < 2; ++k) {
    std::vector<Scalar> row;
    row.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(conc(k, i));
    basis.max_concentrations(k) = percentile(std::move(row), params.concentration_percentile);
    if (!(basis.max_concentrations(k) > Scalar(0))) {
      throw DegenerateTissue("stain " + std::to_string(k) + " has no positive concentration");
    }
  }
  return basis;
}

/// Maps `patch` onto `reference` stain vectors, rescaling each stain's
/// concentrations by the ratio of reference to source maxima.
template <typename Scalar>
ImagePatch normalize_to_reference(const ImagePatch& patch, const StainBasisT<Scalar>& reference,
                                  const MacenkoParams& params = {}) {
  validate(reference);
  const auto io = static_cast<Scalar>(params.io);
  const ODImageT<Scalar> od = rgb_to_od<Scalar>(patch, io);
  const StainBasisT<Scalar> source = estimate_stain_basis(od, params);

  const Eigen::Matrix<Scalar, 2, 1> scale =
      reference.max_concentrations.cwiseQuotient(source.max_concentrations);
  const Eigen::Matrix<Scalar, 2, Eigen::Dynamic> conc =
      scale.asDiagonal() * stain_concentrations(od, source);

  ODImageT<Scalar> out;
  out.width = od.width;
  out.height = od.height;
  out.values = reference.stain_vectors * conc;
  ImagePatch result = od_to_rgb(out, io);
  result.set_microns_per_pixel(patch.microns_per_pixel());
  return result;
}

}  // namespace mitoforge

#endif  // MITOFORGE_STAIN_HPP
