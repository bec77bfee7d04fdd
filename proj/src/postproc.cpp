// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/postproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <unordered_map>

namespace panclust {

void DbscanParams::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) fail("dbscan: eps must be positive");
  if (min_pts < 1) fail("dbscan: min_pts must be at least 1");
}

namespace {

// Uniform grid with cell size eps; a query scans the 27 surrounding cells.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const Point3> points, double eps) : points_(points), eps_(eps), eps2_(eps * eps) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[cell_of(points[i])].push_back(i);
  }

  void query(std::size_t i, std::vector<std::size_t>& out) const {
    out.clear();
    const auto c = cell_of(points_[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells_.end()) continue;
          for (auto j : it->second) {
            const double ddx = points_[i].x - points_[j].x, ddy = points_[i].y - points_[j].y,
                         ddz = points_[i].z - points_[j].z;
            if (ddx * ddx + ddy * ddy + ddz * ddz <= eps2_) out.push_back(j);
          }
        }
  }

 private:
  using CellIndex = std::array<std::int64_t, 3>;

  CellIndex cell_of(const Point3& p) const {
    auto f = [this](double v) {
      return static_cast<std::int64_t>(std::clamp(std::floor(v / eps_), -1e15, 1e15));
    };
    return {f(p.x), f(p.y), f(p.z)};
  }

  struct CellHash {
    std::size_t operator()(const CellIndex& c) const noexcept {
      std::uint64_t h = 1469598103934665603ull;
      for (auto v : c) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
      return static_cast<std::size_t>(h);
    }
  };

  std::span<const Point3> points_;
  double eps_;
  double eps2_;
  std::unordered_map<CellIndex, std::vector<std::size_t>, CellHash> cells_;
};

}  // namespace

std::vector<std::uint32_t> dbscan(std::span<const Point3> points, const DbscanParams& params) {
  params.validate();
  constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
  constexpr std::uint32_t kNoise = 0;
  std::vector<std::uint32_t> label(points.size(), kUnvisited);
  NeighborGrid grid(points, params.eps);
  std::vector<std::size_t> nbrs, nbrs_q;
  std::deque<std::size_t> queue;
  std::uint32_t next = 0;

  for (std::size_t p = 0; p < points.size(); ++p) {
    if (label[p] != kUnvisited) continue;
    grid.query(p, nbrs);
    if (nbrs.size() < params.min_pts) {
      label[p] = kNoise;
      continue;
    }
    const std::uint32_t id = ++next;
    label[p] = id;
    queue.assign(nbrs.begin(), nbrs.end());
    while (!queue.empty()) {
      const auto q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = id;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = id;
      grid.query(q, nbrs_q);
      if (nbrs_q.size() >= params.min_pts) queue.insert(queue.end(), nbrs_q.begin(), nbrs_q.end());
    }
  }
  return label;
}

namespace {

struct Instances {
  // id -> point indices, ascending id
  std::map<InstanceId, std::vector<std::size_t>> members;
  InstanceId max_id = 0;
};

Instances collect(const PanopticLabel& label) {
  Instances out;
  for (std::size_t p = 0; p < label.size(); ++p) {
    const auto id = label.inst()[p];
    if (id == 0) continue;
    out.members[id].push_back(p);
    out.max_id = std::max(out.max_id, id);
  }
  return out;
}

Point3 centroid(std::span<const Point3> points, const std::vector<std::size_t>& idx) {
  Point3 c;
  for (auto p : idx) {
    c.x += points[p].x;
    c.y += points[p].y;
    c.z += points[p].z;
  }
  const double n = static_cast<double>(idx.size());
  c.x /= n;
  c.y /= n;
  c.z /= n;
  return c;
}

void check_sizes(const PanopticLabel& label, std::span<const Point3> points) {
  if (label.size() != points.size())
    fail("post-processing: label has " + std::to_string(label.size()) + " points, cloud has " +
         std::to_string(points.size()));
}

}  // namespace

PanopticLabel post_splitter(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy) {
  check_sizes(label, points);
  auto inst = collect(label);
  std::vector<InstanceId> out = label.inst();
  InstanceId next = inst.max_id;

  for (const auto& [id, idx] : inst.members) {
    const ClassId cls = label.sem()[idx.front()];
    Point3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(), {}};
    Point3 hi{-lo.x, -lo.y, -lo.z, {}};
    std::vector<Point3> sub;
    sub.reserve(idx.size());
    for (auto p : idx) {
      const auto& q = points[p];
      lo = {std::min(lo.x, q.x), std::min(lo.y, q.y), std::min(lo.z, q.z), {}};
      hi = {std::max(hi.x, q.x), std::max(hi.y, q.y), std::max(hi.z, q.z), {}};
      sub.push_back(q);
    }
    if (distance(lo, hi) <= taxonomy.max_extent(cls)) continue;

    const auto parts = dbscan(sub, {taxonomy.merge_eps(cls), 2});
    const auto clusters = *std::max_element(parts.begin(), parts.end());
    const InstanceId base = next;
    next += clusters;
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[idx[k]] = parts[k] > 0 ? base + parts[k] : ++next;
  }
  return PanopticLabel(label.sem(), std::move(out), taxonomy);
}

PanopticLabel post_merger(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy) {
  check_sizes(label, points);
  auto inst = collect(label);
  std::map<ClassId, std::vector<InstanceId>> by_class;
  for (const auto& [id, idx] : inst.members) by_class[label.sem()[idx.front()]].push_back(id);

  std::unordered_map<InstanceId, InstanceId> remap;
  for (const auto& [cls, ids] : by_class) {
    if (ids.size() < 2) continue;
    std::vector<Point3> centers;
    for (auto id : ids) centers.push_back(centroid(points, inst.members[id]));
    const auto groups = dbscan(centers, {taxonomy.merge_eps(cls), 1});
    std::map<std::uint32_t, InstanceId> winner;  // ids ascend, so the first seen is the lowest
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto [it, inserted] = winner.emplace(groups[k], ids[k]);
      if (!inserted) remap[ids[k]] = it->second;
    }
  }
  std::vector<InstanceId> out = label.inst();
  for (auto& id : out)
    if (auto it = remap.find(id); it != remap.end()) id = it->second;
  return PanopticLabel(label.sem(), std::move(out), taxonomy);
}

PanopticLabel post_cyclists(const PanopticLabel& label, std::span<const Point3> points,
                            const ClassTaxonomy& taxonomy) {
  check_sizes(label, points);
  std::vector<ClassId> sem = label.sem();
  for (const auto& rule : taxonomy.rider_rules()) {
    std::map<InstanceId, std::vector<std::size_t>> riders;
    for (std::size_t p = 0; p < sem.size(); ++p)
      if (sem[p] == rule.rider && label.inst()[p] > 0) riders[label.inst()[p]].push_back(p);

    for (const auto& [id, idx] : riders) {
      const Point3 c = centroid(points, idx);
      bool required = false, fallback = false;
      for (std::size_t p = 0; p < sem.size() && !required; ++p) {
        if (sem[p] != rule.required && sem[p] != rule.fallback_vehicle) continue;
        if (distance(points[p], c) > rule.radius) continue;
        (sem[p] == rule.required ? required : fallback) = true;
      }
      if (!required && fallback)
        for (auto p : idx) sem[p] = rule.fallback_rider;
    }
  }
  return PanopticLabel(std::move(sem), label.inst(), taxonomy);
}

PanopticLabel post_process(const PanopticLabel& label, std::span<const Point3> points, const ClassTaxonomy& taxonomy,
                           PostFlags flags) {
  PanopticLabel out = label;
  if (flags.splitter) out = post_splitter(out, points, taxonomy);
  if (flags.merger) out = post_merger(out, points, taxonomy);
  if (flags.cyclists) out = post_cyclists(out, points, taxonomy);
  return out;
}

}  // namespace panclust
