// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "panclust/core.hpp"

namespace panclust {

struct DbscanParams {
  double eps = 1.0;
  std::size_t min_pts = 1;

  void validate() const;
};

/// Density-based clustering. A point is core when at least min_pts points (itself included)
/// lie within eps (inclusive). Clusters are numbered 1.. in order of their lowest-index core
/// point; a border point joins the first cluster that reaches it; noise is 0.
std::vector<std::uint32_t> dbscan(std::span<const Point3> points, const DbscanParams& params);

/// Re-clusters every thing instance whose bounding-box diagonal exceeds max_extent[class]
/// with DBSCAN(merge_eps[class], 2). Sub-clusters and noise points get fresh ids.
PanopticLabel post_splitter(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy);

/// Merges same-class instances whose centroids are density-connected at merge_eps[class];
/// the lowest id of each group survives.
PanopticLabel post_merger(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy);

/// Applies the taxonomy's rider rules: a rider instance without a required-vehicle point near
/// its centroid but with a fallback-vehicle point nearby becomes the fallback rider class.
PanopticLabel post_cyclists(const PanopticLabel& label, std::span<const Point3> points,
                            const ClassTaxonomy& taxonomy);

struct PostFlags {
  bool splitter = false;
  bool merger = false;
  bool cyclists = false;

  static PostFlags all() { return {true, true, true}; }
  bool any() const { return splitter || merger || cyclists; }
};

/// Applies the selected steps in the fixed order splitter, merger, cyclists.
PanopticLabel post_process(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy,
                           PostFlags flags);

inline PanopticLabel post_all(const PanopticLabel& label, std::span<const Point3> points,
                              const ClassTaxonomy& taxonomy) {
  return post_process(label, points, taxonomy, PostFlags::all());
}

}  // namespace panclust
