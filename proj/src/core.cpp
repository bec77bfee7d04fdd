// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace panclust {

bool Point3::finite() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
         (!remission || std::isfinite(*remission));
}

double distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

ClassTaxonomy::ClassTaxonomy(Spec spec) : spec_(std::move(spec)) {
  const auto n = spec_.class_names.size();
  if (n == 0) fail("taxonomy: no classes");
  for (std::size_t c = 0; c < n; ++c) {
    if (!spec_.class_names.count(static_cast<ClassId>(c)))
      fail("taxonomy: class ids must be contiguous from 0, missing " + std::to_string(c));
  }
  kind_.assign(n, 0);
  auto mark = [&](ClassId c, char k) {
    if (c < 0 || static_cast<std::size_t>(c) >= n) fail("taxonomy: class id out of range: " + std::to_string(c));
    if (kind_[c] != 0) fail("taxonomy: class " + std::to_string(c) + " listed twice");
    kind_[c] = k;
  };
  mark(spec_.ignore_id, 'i');
  for (auto c : spec_.stuff_ids) mark(c, 's');
  for (auto c : spec_.thing_ids) mark(c, 't');
  for (std::size_t c = 0; c < n; ++c)
    if (kind_[c] == 0) fail("taxonomy: class " + std::to_string(c) + " is neither stuff, thing nor ignore");
  for (auto c : spec_.thing_ids) {
    auto e = spec_.max_extent.find(c);
    auto m = spec_.merge_eps.find(c);
    if (e == spec_.max_extent.end() || !(e->second > 0))
      fail("taxonomy: max_extent missing or non-positive for thing class " + std::to_string(c));
    if (m == spec_.merge_eps.end() || !(m->second > 0))
      fail("taxonomy: merge_eps missing or non-positive for thing class " + std::to_string(c));
  }
  for (const auto& r : spec_.rider_rules) {
    for (auto c : {r.rider, r.required, r.fallback_vehicle, r.fallback_rider})
      if (c < 0 || static_cast<std::size_t>(c) >= n || kind_[c] != 't')
        fail("taxonomy: rider rule references non-thing class " + std::to_string(c));
    if (!(r.radius > 0)) fail("taxonomy: rider rule radius must be positive");
  }
}

ClassTaxonomy ClassTaxonomy::micro() {
  Spec s;
  s.class_names = {{0, "unlabeled"}, {1, "road"},      {2, "vegetation"}, {3, "car"},         {4, "person"},
                   {5, "bicycle"},   {6, "bicyclist"}, {7, "motorcycle"}, {8, "motorcyclist"}};
  s.ignore_id = 0;
  s.stuff_ids = {1, 2};
  s.thing_ids = {3, 4, 5, 6, 7, 8};
  s.max_extent = {{3, 6.0}, {4, 1.5}, {5, 2.5}, {6, 2.5}, {7, 3.0}, {8, 3.0}};
  s.merge_eps = {{3, 2.0}, {4, 0.5}, {5, 1.0}, {6, 1.0}, {7, 1.2}, {8, 1.2}};
  s.rider_rules = {RiderRule{6, 5, 7, 8, 2.0}};
  return ClassTaxonomy(std::move(s));
}

bool ClassTaxonomy::is_thing(ClassId c) const noexcept { return valid(c) && kind_[c] == 't'; }
bool ClassTaxonomy::is_stuff(ClassId c) const noexcept { return valid(c) && kind_[c] == 's'; }

const std::string& ClassTaxonomy::name(ClassId c) const {
  auto it = spec_.class_names.find(c);
  if (it == spec_.class_names.end()) fail("taxonomy: unknown class " + std::to_string(c));
  return it->second;
}

double ClassTaxonomy::max_extent(ClassId thing) const {
  auto it = spec_.max_extent.find(thing);
  if (it == spec_.max_extent.end()) fail("taxonomy: no max_extent for class " + std::to_string(thing));
  return it->second;
}

double ClassTaxonomy::merge_eps(ClassId thing) const {
  auto it = spec_.merge_eps.find(thing);
  if (it == spec_.merge_eps.end()) fail("taxonomy: no merge_eps for class " + std::to_string(thing));
  return it->second;
}

void check_panoptic(std::span<const ClassId> sem, std::span<const InstanceId> inst, const ClassTaxonomy& taxonomy) {
  if (sem.size() != inst.size())
    fail("label length mismatch: " + std::to_string(sem.size()) + " vs " + std::to_string(inst.size()));
  std::unordered_map<InstanceId, ClassId> owner;
  for (std::size_t p = 0; p < sem.size(); ++p) {
    if (!taxonomy.valid(sem[p])) fail("point " + std::to_string(p) + ": class id out of range");
    if (inst[p] == 0) continue;
    if (!taxonomy.is_thing(sem[p]))
      fail("point " + std::to_string(p) + ": instance id on non-thing class " + std::to_string(sem[p]));
    auto [it, inserted] = owner.emplace(inst[p], sem[p]);
    if (!inserted && it->second != sem[p])
      fail("instance " + std::to_string(inst[p]) + " spans several semantic classes");
  }
}

Scene::Scene(std::vector<Point3> points, std::vector<ClassId> sem_gt, std::vector<InstanceId> inst_gt,
             const ClassTaxonomy& taxonomy)
    : points_(std::move(points)), sem_gt_(std::move(sem_gt)), inst_gt_(std::move(inst_gt)) {
  if (points_.size() != sem_gt_.size())
    fail("scene: " + std::to_string(points_.size()) + " points but " + std::to_string(sem_gt_.size()) + " labels");
  for (std::size_t p = 0; p < points_.size(); ++p)
    if (!points_[p].finite()) fail("scene: non-finite point " + std::to_string(p));
  check_panoptic(sem_gt_, inst_gt_, taxonomy);
}

std::vector<InstanceId> Scene::instance_ids() const {
  std::vector<InstanceId> ids;
  for (auto i : inst_gt_)
    if (i > 0) ids.push_back(i);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

void check_distribution(const RowMatrix& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!(v >= 0.0) || !std::isfinite(v)) fail(std::string(what) + ": negative or non-finite entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      fail(std::string(what) + ": row " + std::to_string(r) + " sums to " + std::to_string(sum));
  }
}

}  // namespace

Prediction::Prediction(RowMatrix sem_prob, RowMatrix inst_prob)
    : sem_prob_(std::move(sem_prob)), inst_prob_(std::move(inst_prob)) {
  if (sem_prob_.rows() != inst_prob_.rows()) fail("prediction: head row counts differ");
  check_distribution(sem_prob_, "prediction.sem_prob");
  check_distribution(inst_prob_, "prediction.inst_prob");
}

PanopticLabel::PanopticLabel(std::vector<ClassId> sem, std::vector<InstanceId> inst, const ClassTaxonomy& taxonomy)
    : sem_(std::move(sem)), inst_(std::move(inst)) {
  check_panoptic(sem_, inst_, taxonomy);
}

std::vector<std::uint32_t> row_argmax(const RowMatrix& m) {
  std::vector<std::uint32_t> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[r] = static_cast<std::uint32_t>(best);
  }
  return out;
}

HardLabels hard_labels(const Prediction& pred) {
  HardLabels h;
  auto sem = row_argmax(pred.sem_prob());
  h.sem.assign(sem.begin(), sem.end());
  h.cluster = row_argmax(pred.inst_prob());
  return h;
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += (out(r, c) = std::exp(logits(r, c) - mx));
    out.row(r) /= sum;
  }
  return out;
}

RowMatrix softmax_backward(const RowMatrix& prob, const RowMatrix& grad_prob) {
  RowMatrix out(prob.rows(), prob.cols());
  for (Eigen::Index r = 0; r < prob.rows(); ++r) {
    const double dot = prob.row(r).dot(grad_prob.row(r));
    out.row(r) = prob.row(r).array() * (grad_prob.row(r).array() - dot);
  }
  return out;
}

}  // namespace panclust
