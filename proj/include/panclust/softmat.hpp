// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <span>
#include <vector>

#include "panclust/core.hpp"

namespace panclust {

/// Percentage-normalized soft confusion matrix between G ground-truth objects (rows) and
/// N predictable clusters (columns). Row i holds the mean cluster distribution of object i.
struct SoftMatrix {
  RowMatrix values;                                   // G x N, rows sum to 1
  std::vector<InstanceId> gt_ids;                     // row -> ground-truth instance id, ascending
  std::vector<std::vector<std::size_t>> point_index;  // row -> point indices of the object

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
  bool empty() const noexcept { return values.rows() == 0; }
};

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Only points with a positive instance id contribute. Throws Error on length mismatch.
SoftMatrix build_soft_matrix(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob);
SoftMatrix build_soft_matrix(const Scene& scene, const RowMatrix& inst_prob);

/// Wraps a raw G x N matrix (tests, oracles). Rows are not re-normalized.
SoftMatrix soft_matrix_from_values(RowMatrix values);

/// One cell per column (ordered by column): the row holding that column's maximum,
/// ties to the lowest row. Empty for an empty matrix.
std::vector<Cell> column_maxima(const SoftMatrix& s);

/// Chains dL/dS (G x N) through the row normalization to dL/dp for every point (P x N).
/// Points outside any object receive zero rows.
RowMatrix chain_to_points(const SoftMatrix& s, const RowMatrix& grad_s, std::size_t num_points);

}  // namespace panclust
