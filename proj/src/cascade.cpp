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

#include "mitoforge/cascade.hpp"

#include <algorithm>
#include <numeric>

namespace mitoforge {

std::string_view to_string(Sampler sampler) {
  switch (sampler) {
    case Sampler::Random:
      return "random";
    case Sampler::OHEM:
      return "ohem";
    case Sampler::IoUBalanced:
      return "iou_balanced";
  }
  return "random";
}

std::optional<Sampler> parse_sampler(std::string_view text) {
  if (text == "random") return Sampler::Random;
  if (text == "ohem") return Sampler::OHEM;
  if (text == "iou_balanced") return Sampler::IoUBalanced;
  return std::nullopt;
}

void validate(const CascadeStageConfig& cfg) {
  if (!(cfg.iou_neg_threshold >= 0.0 && cfg.iou_neg_threshold <= cfg.iou_pos_threshold &&
        cfg.iou_pos_threshold <= 1.0)) {
    throw InvalidArgument("stage thresholds must satisfy 0 <= neg <= pos <= 1");
  }
  if (cfg.samples_per_image == 0) throw InvalidArgument("samples_per_image must be positive");
  if (!(cfg.positive_fraction >= 0.0 && cfg.positive_fraction <= 1.0)) {
    throw InvalidArgument("positive_fraction must lie in [0, 1]");
  }
  if (cfg.iou_bins < 1) throw InvalidArgument("iou_bins must be >= 1");
}

std::vector<CascadeStageConfig> default_cascade_stages() {
  std::vector<CascadeStageConfig> stages(3);
  const double thresholds[] = {0.5, 0.6, 0.7};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].iou_pos_threshold = thresholds[i];
    stages[i].iou_neg_threshold = thresholds[i];
  }
  return stages;
}

AssignmentResult assign_proposals(std::span<const BBox> proposals, std::span<const BBox> gts,
                                  const CascadeStageConfig& cfg) {
  validate(cfg);
  AssignmentResult out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    ProposalAssignment& a = out[i];
    if (gts.empty()) continue;  // default is Negative, no match
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(proposals[i], gts[g]);
      if (a.gt_index < 0 || v > a.max_iou) {
        a.max_iou = v;
        a.gt_index = static_cast<int>(g);
      }
    }
    if (a.max_iou >= cfg.iou_pos_threshold) {
      a.status = ProposalStatus::Positive;
    } else if (a.max_iou < cfg.iou_neg_threshold) {
      a.status = ProposalStatus::Negative;
    } else {
      a.status = ProposalStatus::Ignore;
    }
  }
  return out;
}

AssignmentResult assign_proposals(std::span<const BBox> proposals,
                                  std::span<const Annotation> gts, const CascadeStageConfig& cfg) {
  std::vector<BBox> boxes;
  boxes.reserve(gts.size());
  for (const Annotation& a : gts) boxes.push_back(a.box);
  return assign_proposals(proposals, boxes, cfg);
}

namespace {

std::vector<std::size_t> indices_with(const AssignmentResult& assignment, ProposalStatus status) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i].status == status) out.push_back(i);
  }
  return out;
}

/// `count` of `pool` uniformly without replacement, ascending.
std::vector<std::size_t> choose_uniform(std::vector<std::size_t> pool, std::size_t count,
                                        Rng& rng) {
  if (count < pool.size()) {
    // Partial Fisher-Yates over the front of the pool.
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t positive_quota(const CascadeStageConfig& cfg) {
  return static_cast<std::size_t>(
      std::floor(cfg.positive_fraction * static_cast<double>(cfg.samples_per_image)));
}

void require_candidates(const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg) {
  if (pos.empty() && neg.empty()) {
    throw EmptyAssignment("no positive or negative proposals to sample");
  }
}

}  // namespace

std::vector<std::size_t> sample_random(const AssignmentResult& assignment,
                                       const CascadeStageConfig& cfg, Rng& rng) {
  validate(cfg);
  const auto pos = indices_with(assignment, ProposalStatus::Positive);
  const auto neg = indices_with(assignment, ProposalStatus::Negative);
  require_candidates(pos, neg);

  auto out = choose_uniform(pos, std::min(positive_quota(cfg), pos.size()), rng);
  const std::size_t neg_quota = cfg.samples_per_image - out.size();
  const auto negs = choose_uniform(neg, std::min(neg_quota, neg.size()), rng);
  out.insert(out.end(), negs.begin(), negs.end());
  return out;
}

std::vector<std::size_t> sample_ohem(const AssignmentResult& assignment,
                                     std::span<const double> losses,
                                     const CascadeStageConfig& cfg) {
  validate(cfg);
  if (losses.size() != assignment.size()) {
    throw MissingLosses("expected " + std::to_string(assignment.size()) + " losses, got " +
                        std::to_string(losses.size()));
  }
  if (std::any_of(losses.begin(), losses.end(), [](double l) { return !std::isfinite(l); })) {
    throw MissingLosses("losses must be finite");
  }
  auto pos = indices_with(assignment, ProposalStatus::Positive);
  auto neg = indices_with(assignment, ProposalStatus::Negative);
  require_candidates(pos, neg);

  auto hardest = [&](std::vector<std::size_t>& pool, std::size_t count) {
    std::stable_sort(pool.begin(), pool.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    pool.resize(std::min(count, pool.size()));
  };
  hardest(pos, positive_quota(cfg));
  hardest(neg, cfg.samples_per_image - pos.size());
  pos.insert(pos.end(), neg.begin(), neg.end());
  return pos;
}

std::vector<std::size_t> sample_iou_balanced(const AssignmentResult& assignment,
                                             const CascadeStageConfig& cfg, int bins, Rng& rng) {
  validate(cfg);
  if (bins < 1) throw InvalidArgument("bins must be >= 1");
  const auto pos = indices_with(assignment, ProposalStatus::Positive);
  const auto neg = indices_with(assignment, ProposalStatus::Negative);
  require_candidates(pos, neg);

  auto out = choose_uniform(pos, std::min(positive_quota(cfg), pos.size()), rng);
  const std::size_t quota = std::min(cfg.samples_per_image - out.size(), neg.size());

  const auto nbins = static_cast<std::size_t>(bins);
  std::vector<std::vector<std::size_t>> members(nbins);
  const double width = cfg.iou_neg_threshold / bins;
  for (std::size_t idx : neg) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = std::min(static_cast<std::size_t>(assignment[idx].max_iou / width), nbins - 1);
    }
    members[b].push_back(idx);
  }

  std::vector<std::size_t> take(nbins, 0);
  for (std::size_t b = 0; b < nbins; ++b) {
    const std::size_t target = quota / nbins + (b < quota % nbins ? 1 : 0);
    take[b] = std::min(target, members[b].size());
  }
  std::size_t leftover = quota - std::accumulate(take.begin(), take.end(), std::size_t{0});
  while (leftover > 0) {
    std::vector<std::size_t> open;
    for (std::size_t b = 0; b < nbins; ++b) {
      if (take[b] < members[b].size()) open.push_back(b);
    }
    if (open.empty()) break;
    const std::size_t share = leftover / open.size();
    std::size_t extra = leftover % open.size();
    for (std::size_t b : open) {
      std::size_t add = share;
      if (extra > 0) {
        ++add;
        --extra;
      }
      add = std::min(add, members[b].size() - take[b]);
      take[b] += add;
      leftover -= add;
    }
  }

  std::vector<std::size_t> negs;
  for (std::size_t b = 0; b < nbins; ++b) {
    const auto chosen = choose_uniform(members[b], take[b], rng);
    negs.insert(negs.end(), chosen.begin(), chosen.end());
  }
  std::sort(negs.begin(), negs.end());
  out.insert(out.end(), negs.begin(), negs.end());
  return out;
}

std::vector<std::size_t> sample(const AssignmentResult& assignment, const CascadeStageConfig& cfg,
                                Rng& rng, std::span<const double> losses) {
  switch (cfg.sampler) {
    case Sampler::OHEM:
      return sample_ohem(assignment, losses, cfg);
    case Sampler::IoUBalanced:
      return sample_iou_balanced(assignment, cfg, cfg.iou_bins, rng);
    case Sampler::Random:
      break;
  }
  return sample_random(assignment, cfg, rng);
}

CascadeReport run_cascade(std::span<const BBox> proposals, std::span<const BBox> gts,
                          std::span<const CascadeStageConfig> stages, double refine_blend, Rng& rng,
                          const LossProvider& losses) {
  if (stages.empty()) throw InvalidArgument("cascade needs at least one stage");
  if (!(refine_blend >= 0.0 && refine_blend <= 1.0)) {
    throw InvalidArgument("refine_blend must lie in [0, 1]");
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    validate(stages[s]);
    if (s > 0 && !(stages[s].iou_pos_threshold > stages[s - 1].iou_pos_threshold)) {
      throw InvalidArgument("stage positive thresholds must be strictly increasing");
    }
  }

  std::vector<BBox> boxes(proposals.begin(), proposals.end());
  CascadeReport report;
  for (std::size_t stage = 0; stage < stages.size(); ++stage) {
    const CascadeStageConfig& cfg = stages[stage];
    StageStats st;
    st.proposals = boxes;
    st.assignment = assign_proposals(boxes, gts, cfg);
    std::vector<double> stage_losses;
    if (cfg.sampler == Sampler::OHEM) {
      if (!losses) throw MissingLosses("OHEM stage without a loss provider");
      stage_losses = losses(stage, st.assignment);
    }
    st.sampled = sample(st.assignment, cfg, rng, stage_losses);

    double iou_sum = 0.0;
    for (const ProposalAssignment& a : st.assignment) {
      if (a.status == ProposalStatus::Positive) {
        ++st.positives;
        iou_sum += a.max_iou;
      } else if (a.status == ProposalStatus::Negative) {
        ++st.negatives;
      }
    }
    st.mean_pos_iou = st.positives > 0 ? iou_sum / static_cast<double>(st.positives) : 0.0;
    for (std::size_t idx : st.sampled) {
      if (st.assignment[idx].status == ProposalStatus::Positive) {
        ++st.sampled_positives;
      } else {
        ++st.sampled_negatives;
      }
    }

    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const ProposalAssignment& a = st.assignment[i];
      if (a.status != ProposalStatus::Positive) continue;
      const BBox& g = gts[static_cast<std::size_t>(a.gt_index)];
      BBox& b = boxes[i];
      const double keep = 1.0 - refine_blend;
      b = {keep * b.x_min + refine_blend * g.x_min, keep * b.y_min + refine_blend * g.y_min,
           keep * b.x_max + refine_blend * g.x_max, keep * b.y_max + refine_blend * g.y_max};
    }
    report.stages.push_back(std::move(st));
  }
  return report;
}

FocalLoss focal_loss(double p, double gamma, double alpha_weight) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("focal_loss needs p in (0, 1]");
  if (!(gamma >= 0.0)) throw InvalidArgument("focal_loss needs gamma >= 0");
  if (!(alpha_weight > 0.0)) throw InvalidArgument("focal_loss needs alpha_weight > 0");
  const double q = 1.0 - p;
  const double log_p = std::log(p);
  const double modulator = std::pow(q, gamma);
  FocalLoss out;
  out.loss = -alpha_weight * modulator * log_p;
  // d/dp of (1-p)^gamma is -gamma (1-p)^(gamma-1); the product with ln p
  // tends to 0 as p -> 1 for every gamma > 0.
  const double modulator_term =
      (gamma == 0.0 || p == 1.0) ? 0.0 : gamma * std::pow(q, gamma - 1.0) * log_p;
  out.grad = alpha_weight * (modulator_term - modulator / p);
  if (out.loss == 0.0) out.loss = 0.0;  // no negative zero
  return out;
}

double warmup_lr(long long step, double base_lr, double warmup_ratio, long long warmup_steps) {
  if (step < 0) throw InvalidArgument("step must be >= 0");
  if (!(base_lr > 0.0)) throw InvalidArgument("base_lr must be positive");
  if (!(warmup_ratio > 0.0 && warmup_ratio <= 1.0)) {
    throw InvalidArgument("warmup_ratio must lie in (0, 1]");
  }
  if (warmup_steps < 1) throw InvalidArgument("warmup_steps must be >= 1");
  if (step >= warmup_steps) return base_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(warmup_steps);
  return base_lr * (warmup_ratio + (1.0 - warmup_ratio) * progress);
}

}  // namespace mitoforge
