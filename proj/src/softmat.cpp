// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/softmat.hpp"

#include <map>

namespace panclust {

SoftMatrix build_soft_matrix(std::span<const InstanceId> inst_gt, const RowMatrix& inst_prob) {
  if (inst_gt.size() != static_cast<std::size_t>(inst_prob.rows()))
    fail("soft matrix: " + std::to_string(inst_gt.size()) + " labels but " + std::to_string(inst_prob.rows()) +
         " probability rows");

  std::map<InstanceId, std::vector<std::size_t>> objects;
  for (std::size_t p = 0; p < inst_gt.size(); ++p)
    if (inst_gt[p] > 0) objects[inst_gt[p]].push_back(p);

  SoftMatrix s;
  s.values = RowMatrix::Zero(static_cast<Eigen::Index>(objects.size()), inst_prob.cols());
  Eigen::Index row = 0;
  for (auto& [id, points] : objects) {
    for (auto p : points) s.values.row(row) += inst_prob.row(static_cast<Eigen::Index>(p));
    s.values.row(row) /= static_cast<double>(points.size());
    s.gt_ids.push_back(id);
    s.point_index.push_back(std::move(points));
    ++row;
  }
  return s;
}

SoftMatrix build_soft_matrix(const Scene& scene, const RowMatrix& inst_prob) {
  return build_soft_matrix(scene.inst_gt(), inst_prob);
}

SoftMatrix soft_matrix_from_values(RowMatrix values) {
  SoftMatrix s;
  s.values = std::move(values);
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    s.gt_ids.push_back(static_cast<InstanceId>(r + 1));
    s.point_index.emplace_back();
  }
  return s;
}

std::vector<Cell> column_maxima(const SoftMatrix& s) {
  std::vector<Cell> out;
  if (s.empty()) return out;
  out.reserve(s.cols());
  for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < s.values.rows(); ++r)
      if (s.values(r, c) > s.values(best, c)) best = r;
    out.push_back({static_cast<std::size_t>(best), static_cast<std::size_t>(c)});
  }
  return out;
}

RowMatrix chain_to_points(const SoftMatrix& s, const RowMatrix& grad_s, std::size_t num_points) {
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(num_points), s.values.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto& points = s.point_index[r];
    if (points.empty()) continue;
    const auto row = grad_s.row(static_cast<Eigen::Index>(r)) / static_cast<double>(points.size());
    for (auto p : points) out.row(static_cast<Eigen::Index>(p)) = row;
  }
  return out;
}

}  // namespace panclust
