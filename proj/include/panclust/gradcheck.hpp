// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "panclust/core.hpp"
#include "panclust/losses.hpp"

namespace panclust {

/// A loss expressed on logits; probabilities are re-derived by softmax on every probe.
struct LogitLoss {
  std::function<double(const RowMatrix& logits)> value;
  std::function<RowMatrix(const RowMatrix& logits)> gradient;
  /// Rows (points) whose coordinates sit within `margin` of a selection tie. Optional.
  std::function<std::vector<bool>(const RowMatrix& logits, double margin)> near_tie;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  bool passed = true;
};

/// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kRelErrorFloor = 1e-5;

/// Central differences on every logit; coordinates of rows flagged by near_tie(logits, 10 h)
/// are skipped.
GradCheckReport finite_difference_check(const LogitLoss& loss, const RowMatrix& logits, double h, double tolerance);

enum class LossKind { Impurity, Fragmentation, CrossEntropy, Lovasz, Total };

LossKind parse_loss_kind(const std::string& name);
const char* loss_kind_name(LossKind kind);

/// Rows of S with a column-maximum or row-fragment decision within `margin` (G entries).
std::vector<bool> soft_matrix_tie_rows(const SoftMatrix& s, double margin, bool fragments);

/// Points whose per-class Lovász error lies within `margin` of another point's error.
std::vector<bool> lovasz_tie_points(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt, ClassId ignore_id,
                                    double margin);

/// Logit-space adapter for one loss on a fixed scene. Instance losses take P x N logits,
/// semantic ones P x C, Total takes [semantic | instance] side by side. Fragmentation
/// denominators are frozen at `anchor` (the straight-through reading).
LogitLoss make_logit_loss(LossKind kind, const Scene& scene, const ClassTaxonomy& taxonomy,
                          const LossWeights& weights, std::size_t num_clusters, const RowMatrix& anchor);

struct GradCheckTrial {
  Scene scene;
  RowMatrix logits;
  std::size_t num_clusters = 0;
};

/// Random small scene (micro taxonomy) with Gaussian logits of the shape `kind` expects.
GradCheckTrial random_gradcheck_trial(LossKind kind, const ClassTaxonomy& taxonomy, std::uint64_t seed);

struct GradCheckSummary {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double worst_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
};

GradCheckSummary run_gradcheck(LossKind kind, std::size_t trials, double h, double tolerance, std::uint64_t seed);

}  // namespace panclust
