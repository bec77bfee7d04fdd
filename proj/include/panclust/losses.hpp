// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "panclust/core.hpp"
#include "panclust/softmat.hpp"

namespace panclust {

inline constexpr double kLogClamp = 1e-12;
/// Cells of S below this value are treated as empty: they are never fragments and
/// carry no fragmentation gradient.
inline constexpr double kFragmentClamp = 1e-6;

struct LossWeights {
  double w_imp = 0.2;
  double w_frag = 0.05;
  double w_sem = 0.7;
  double small_instance_factor = 3.0;
  std::size_t small_instance_threshold = 100;
  /// Per-class cross-entropy weights; empty means 1 for every class.
  std::vector<double> class_weights;

  void validate() const;
};

/// A loss value and its gradient w.r.t. the input array (S for matrix-level losses,
/// per-point probabilities for point-level losses).
struct LossResult {
  double value = 0.0;
  RowMatrix grad;
};

/// Column-maximum cells that share their row with a larger column maximum. The largest
/// column maximum of a row (lowest column on ties) is exempt; cells below kFragmentClamp are
/// not counted.
std::vector<Cell> fragment_cells(const SoftMatrix& s);

/// Sum of non-column-maximum cells divided by the sum of S. Gradient w.r.t. S (G x N).
LossResult impurity_loss(const SoftMatrix& s);

/// Fragment count divided by N, differentiated with frozen denominators: each fragment cell
/// gets gradient 1 / (N * denominator). `frozen` supplies the denominators (defaults to S
/// itself, which makes the value exactly |F| / N).
LossResult fragmentation_loss(const SoftMatrix& s, const RowMatrix* frozen = nullptr);

/// Point-level wrappers: gradients w.r.t. inst_prob (P x N).
LossResult impurity_loss(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob);
LossResult fragmentation_loss(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob,
                              const RowMatrix* frozen = nullptr);

/// small_instance_factor for points of instances with fewer than small_instance_threshold
/// points, 1 elsewhere.
std::vector<double> small_instance_weights(std::span<const InstanceId> inst_gt, double factor,
                                           std::size_t threshold);

/// ENet-style 1 / ln(1.02 + f_c) over the non-ignored points of `scenes`; ignore class weight 0.
std::vector<double> inverse_log_frequency_weights(std::span<const Scene> scenes, const ClassTaxonomy& taxonomy);

/// Mean over non-ignored points of -w_c * w_p * log(max(p_true, kLogClamp)).
/// Empty weight spans mean 1.
LossResult weighted_cross_entropy(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt,
                                  std::span<const double> class_weights, std::span<const double> point_weights,
                                  ClassId ignore_id);

/// Lovász extension of the Jaccard loss, averaged over classes present in the ground truth.
LossResult lovasz_softmax(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt, ClassId ignore_id);

struct TotalLoss {
  double value = 0.0;
  double cross_entropy = 0.0;
  double lovasz = 0.0;
  double impurity = 0.0;
  double fragmentation = 0.0;
  RowMatrix sem_grad;   // P x C
  RowMatrix inst_grad;  // P x N
};

struct TotalLossOptions {
  /// Frozen fragmentation denominators (G x N); nullptr uses the current S.
  const RowMatrix* frozen_fragments = nullptr;
};

/// w_sem * (WCE + Lovász) + w_imp * impurity + w_frag * fragmentation.
TotalLoss total_loss(const Scene& scene, const Prediction& pred, const LossWeights& weights,
                     const ClassTaxonomy& taxonomy, const TotalLossOptions& options = {});

}  // namespace panclust
