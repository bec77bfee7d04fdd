// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace panclust {

void LossWeights::validate() const {
  for (double w : {w_imp, w_frag, w_sem, small_instance_factor})
    if (!(w >= 0.0) || !std::isfinite(w)) fail("loss weights must be finite and non-negative");
  for (double w : class_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) fail("class weights must be finite and non-negative");
}

std::vector<Cell> fragment_cells(const SoftMatrix& s) {
  std::vector<Cell> out;
  if (s.empty()) return out;
  std::vector<std::vector<std::size_t>> per_row(s.rows());
  for (const auto& c : column_maxima(s))
    if (s.values(c.row, c.col) >= kFragmentClamp) per_row[c.row].push_back(c.col);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto& cols = per_row[r];
    if (cols.size() < 2) continue;
    std::size_t exempt = cols.front();  // columns ascend, so strict > keeps the lowest on ties
    for (auto c : cols)
      if (s.values(r, c) > s.values(r, exempt)) exempt = c;
    for (auto c : cols)
      if (c != exempt) out.push_back({r, c});
  }
  return out;
}

LossResult impurity_loss(const SoftMatrix& s) {
  LossResult res{0.0, RowMatrix::Zero(s.values.rows(), s.values.cols())};
  if (s.empty()) return res;
  // Rows sum to one, so the denominator is the constant G.
  const double total = static_cast<double>(s.rows());
  res.grad.setConstant(1.0 / total);
  double maxima = 0.0;
  for (const auto& c : column_maxima(s)) {
    maxima += s.values(c.row, c.col);
    res.grad(c.row, c.col) = 0.0;
  }
  res.value = std::max(0.0, (s.values.sum() - maxima) / total);
  return res;
}

LossResult fragmentation_loss(const SoftMatrix& s, const RowMatrix* frozen) {
  LossResult res{0.0, RowMatrix::Zero(s.values.rows(), s.values.cols())};
  if (s.empty()) return res;
  const double n = static_cast<double>(s.cols());
  for (const auto& c : fragment_cells(s)) {
    const double denom = frozen ? (*frozen)(c.row, c.col) : s.values(c.row, c.col);
    if (denom < kFragmentClamp) continue;
    res.value += s.values(c.row, c.col) / denom;
    res.grad(c.row, c.col) = 1.0 / (n * denom);
  }
  res.value /= n;
  return res;
}

LossResult impurity_loss(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob) {
  auto s = build_soft_matrix(inst_gt, inst_prob);
  auto r = impurity_loss(s);
  return {r.value, chain_to_points(s, r.grad, inst_gt.size())};
}

LossResult fragmentation_loss(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob,
                              const RowMatrix* frozen) {
  auto s = build_soft_matrix(inst_gt, inst_prob);
  auto r = fragmentation_loss(s, frozen);
  return {r.value, chain_to_points(s, r.grad, inst_gt.size())};
}

std::vector<double> small_instance_weights(std::span<const InstanceId> inst_gt, double factor,
                                           std::size_t threshold) {
  std::unordered_map<InstanceId, std::size_t> sizes;
  for (auto id : inst_gt)
    if (id > 0) ++sizes[id];
  std::vector<double> w(inst_gt.size(), 1.0);
  for (std::size_t p = 0; p < inst_gt.size(); ++p)
    if (inst_gt[p] > 0 && sizes[inst_gt[p]] < threshold) w[p] = factor;
  return w;
}

std::vector<double> inverse_log_frequency_weights(std::span<const Scene> scenes, const ClassTaxonomy& taxonomy) {
  std::vector<double> counts(taxonomy.num_classes(), 0.0);
  double total = 0.0;
  for (const auto& scene : scenes)
    for (auto c : scene.sem_gt())
      if (!taxonomy.is_ignore(c)) {
        counts[c] += 1.0;
        total += 1.0;
      }
  std::vector<double> w(taxonomy.num_classes(), 0.0);
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (taxonomy.is_ignore(static_cast<ClassId>(c))) continue;
    const double freq = total > 0 ? counts[c] / total : 0.0;
    w[c] = 1.0 / std::log(1.02 + freq);
  }
  return w;
}

LossResult weighted_cross_entropy(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt,
                                  std::span<const double> class_weights, std::span<const double> point_weights,
                                  ClassId ignore_id) {
  const auto points = static_cast<std::size_t>(sem_prob.rows());
  if (sem_gt.size() != points) fail("cross-entropy: label count differs from prediction rows");
  if (!point_weights.empty() && point_weights.size() != points) fail("cross-entropy: point weight count mismatch");
  if (!class_weights.empty() && class_weights.size() != static_cast<std::size_t>(sem_prob.cols()))
    fail("cross-entropy: class weight count mismatch");

  LossResult res{0.0, RowMatrix::Zero(sem_prob.rows(), sem_prob.cols())};
  std::size_t counted = 0;
  for (std::size_t p = 0; p < points; ++p)
    if (sem_gt[p] != ignore_id) ++counted;
  if (counted == 0) return res;

  const double inv = 1.0 / static_cast<double>(counted);
  for (std::size_t p = 0; p < points; ++p) {
    const ClassId c = sem_gt[p];
    if (c == ignore_id) continue;
    if (c < 0 || c >= sem_prob.cols()) fail("cross-entropy: class id out of range");
    const double w = (class_weights.empty() ? 1.0 : class_weights[c]) * (point_weights.empty() ? 1.0 : point_weights[p]);
    const double prob = sem_prob(static_cast<Eigen::Index>(p), c);
    if (prob > kLogClamp) {
      res.value -= w * std::log(prob) * inv;
      res.grad(static_cast<Eigen::Index>(p), c) = -w / prob * inv;
    } else {
      res.value -= w * std::log(kLogClamp) * inv;
    }
  }
  return res;
}

LossResult lovasz_softmax(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt, ClassId ignore_id) {
  const auto points = static_cast<std::size_t>(sem_prob.rows());
  if (sem_gt.size() != points) fail("lovasz: label count differs from prediction rows");
  LossResult res{0.0, RowMatrix::Zero(sem_prob.rows(), sem_prob.cols())};

  std::vector<std::size_t> kept;
  for (std::size_t p = 0; p < points; ++p)
    if (sem_gt[p] != ignore_id) kept.push_back(p);
  if (kept.empty()) return res;

  std::vector<std::size_t> order(kept.size());
  std::vector<double> errors(kept.size());
  std::vector<char> fg(kept.size());
  std::size_t present = 0;
  for (Eigen::Index c = 0; c < sem_prob.cols(); ++c) {
    double gts = 0.0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      fg[k] = sem_gt[kept[k]] == c;
      gts += fg[k];
      errors[k] = std::abs((fg[k] ? 1.0 : 0.0) - sem_prob(static_cast<Eigen::Index>(kept[k]), c));
    }
    if (gts == 0.0) continue;
    ++present;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return errors[a] > errors[b]; });

    // Jaccard gradient of the sorted ground truth: successive differences of
    // 1 - intersection / union along the prefix.
    double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      (fg[idx] ? cum_fg : cum_bg) += 1.0;
      const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
      const double g = jaccard - prev;
      prev = jaccard;
      res.value += errors[idx] * g;
      // d error / d p = -1 for foreground, +1 for background
      res.grad(static_cast<Eigen::Index>(kept[idx]), c) += fg[idx] ? -g : g;
    }
  }
  res.value /= static_cast<double>(present);
  res.grad /= static_cast<double>(present);
  return res;
}

TotalLoss total_loss(const Scene& scene, const Prediction& pred, const LossWeights& weights,
                     const ClassTaxonomy& taxonomy, const TotalLossOptions& options) {
  if (scene.size() != pred.size()) fail("total loss: scene and prediction sizes differ");
  if (pred.num_classes() != taxonomy.num_classes()) fail("total loss: prediction class count differs from taxonomy");
  weights.validate();

  const auto point_w =
      small_instance_weights(scene.inst_gt(), weights.small_instance_factor, weights.small_instance_threshold);
  auto wce = weighted_cross_entropy(pred.sem_prob(), scene.sem_gt(), weights.class_weights, point_w,
                                    taxonomy.ignore_id());
  auto lov = lovasz_softmax(pred.sem_prob(), scene.sem_gt(), taxonomy.ignore_id());

  const auto s = build_soft_matrix(scene, pred.inst_prob());
  auto imp = impurity_loss(s);
  auto frag = fragmentation_loss(s, options.frozen_fragments);

  TotalLoss out;
  out.cross_entropy = wce.value;
  out.lovasz = lov.value;
  out.impurity = imp.value;
  out.fragmentation = frag.value;
  out.value = weights.w_sem * (wce.value + lov.value) + weights.w_imp * imp.value + weights.w_frag * frag.value;
  out.sem_grad = weights.w_sem * (wce.grad + lov.grad);
  out.inst_grad = chain_to_points(s, weights.w_imp * imp.grad + weights.w_frag * frag.grad, scene.size());
  return out;
}

}  // namespace panclust
