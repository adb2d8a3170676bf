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

#ifndef MITOFORGE_CASCADE_HPP
#define MITOFORGE_CASCADE_HPP

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitoforge/annotation.hpp"
#include "mitoforge/random.hpp"

namespace mitoforge {

enum class Sampler { Random, OHEM, IoUBalanced };

std::string_view to_string(Sampler sampler);
std::optional<Sampler> parse_sampler(std::string_view text);

/// Training-time proposal labeling and sampling of one cascade stage.
struct CascadeStageConfig {
  double iou_pos_threshold = 0.5;
  double iou_neg_threshold = 0.5;
  std::size_t samples_per_image = 512;
  double positive_fraction = 0.25;
  Sampler sampler = Sampler::Random;
  /// Number of IoU bins for Sampler::IoUBalanced.
  int iou_bins = 3;
};

void validate(const CascadeStageConfig& cfg);

/// The canonical three-stage schedule with positive thresholds 0.5 / 0.6 / 0.7.
std::vector<CascadeStageConfig> default_cascade_stages();

enum class ProposalStatus { Positive, Negative, Ignore };

struct ProposalAssignment {
  ProposalStatus status = ProposalStatus::Negative;
  /// Index of the argmax ground truth, or -1 when there is none.
  int gt_index = -1;
  double max_iou = 0.0;
};

using AssignmentResult = std::vector<ProposalAssignment>;

/// Labels each proposal by its best IoU over `gts` (ties go to the lowest gt
/// index): Positive if >= iou_pos_threshold, Negative if < iou_neg_threshold,
/// Ignore otherwise. With no ground truth everything is Negative.
AssignmentResult assign_proposals(std::span<const BBox> proposals, std::span<const BBox> gts,
                                  const CascadeStageConfig& cfg);

AssignmentResult assign_proposals(std::span<const BBox> proposals,
                                  std::span<const Annotation> gts, const CascadeStageConfig& cfg);

/// Uniform sampling without replacement: up to
/// floor(positive_fraction * samples_per_image) positives, the remainder
/// filled with negatives. Returned indices are positives then negatives,
/// each group ascending.
std::vector<std::size_t> sample_random(const AssignmentResult& assignment,
                                       const CascadeStageConfig& cfg, Rng& rng);

/// Hard example mining: the same quotas, filled by descending loss within
/// positives and within negatives. Equal losses keep input order.
std::vector<std::size_t> sample_ohem(const AssignmentResult& assignment,
                                     std::span<const double> losses,
                                     const CascadeStageConfig& cfg);

/// Positives as in sample_random; the negative quota is spread evenly over
/// `bins` equal-width IoU intervals of [0, iou_neg_threshold), with quota a
/// bin cannot fill handed to bins that still have candidates.
std::vector<std::size_t> sample_iou_balanced(const AssignmentResult& assignment,
                                             const CascadeStageConfig& cfg, int bins, Rng& rng);

/// Dispatches on cfg.sampler. `losses` is required for OHEM.
std::vector<std::size_t> sample(const AssignmentResult& assignment, const CascadeStageConfig& cfg,
                                Rng& rng, std::span<const double> losses = {});

struct StageStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t sampled_positives = 0;
  std::size_t sampled_negatives = 0;
  /// Mean max-IoU over all positive proposals; 0 without positives.
  double mean_pos_iou = 0.0;
  AssignmentResult assignment;
  std::vector<std::size_t> sampled;
  /// Proposal boxes as seen by this stage, before its refinement.
  std::vector<BBox> proposals;
};

struct CascadeReport {
  std::vector<StageStats> stages;
};

/// Per-proposal losses for an OHEM stage, given the stage index and its
/// assignment.
using LossProvider = std::function<std::vector<double>(std::size_t, const AssignmentResult&)>;

/// Runs assign -> sample -> refine for each stage. Between stages every
/// positive proposal moves toward its matched gt by
/// box <- (1 - refine_blend) * box + refine_blend * gt, cornerwise. This
/// convex snap stands in for a learned box regressor.
CascadeReport run_cascade(std::span<const BBox> proposals, std::span<const BBox> gts,
                          std::span<const CascadeStageConfig> stages, double refine_blend, Rng& rng,
                          const LossProvider& losses = {});

struct FocalLoss {
  double loss = 0.0;
  /// Derivative of the loss with respect to p.
  double grad = 0.0;
};

/// -alpha * (1 - p)^gamma * ln(p) for the probability p of the true class.
FocalLoss focal_loss(double p, double gamma = 2.0, double alpha_weight = 1.0);

/// Linear warmup from base_lr * warmup_ratio at step 0 to base_lr at
/// warmup_steps, constant afterwards.
double warmup_lr(long long step, double base_lr = 0.01, double warmup_ratio = 0.001,
                 long long warmup_steps = 500);

/// Rescales `gradient` onto the ball of radius `max_norm` when it lies
/// outside; otherwise returns it unchanged.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> clip_gradient_norm(
    const Eigen::MatrixBase<Derived>& gradient, typename Derived::Scalar max_norm) {
  using Scalar = typename Derived::Scalar;
  if (!(max_norm > Scalar(0)) || !std::isfinite(max_norm)) {
    throw InvalidArgument("max_norm must be positive and finite");
  }
  if (!gradient.allFinite()) throw InvalidArgument("gradient has non-finite entries");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g = gradient;
  const Scalar norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
  return g;
}

}  // namespace mitoforge

#endif  // MITOFORGE_CASCADE_HPP
