// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace panclust {

using ClassId = std::int32_t;
using InstanceId = std::uint32_t;

/// Row-major dense matrix used for per-point distributions and gradients.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorKind { Validation, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::Validation, what); }
[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::Io, what); }

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::optional<double> remission;

  bool finite() const noexcept;
};

double distance(const Point3& a, const Point3& b) noexcept;

/// Rider re-labeling rule: a `rider` instance with no `required` vehicle point nearby but
/// a `fallback_vehicle` point nearby becomes `fallback_rider`.
struct RiderRule {
  ClassId rider = 0;
  ClassId required = 0;
  ClassId fallback_vehicle = 0;
  ClassId fallback_rider = 0;
  double radius = 0.0;
};

class ClassTaxonomy {
 public:
  struct Spec {
    std::map<ClassId, std::string> class_names;
    std::vector<ClassId> stuff_ids;
    std::vector<ClassId> thing_ids;
    ClassId ignore_id = 0;
    std::map<ClassId, double> max_extent;
    std::map<ClassId, double> merge_eps;
    std::vector<RiderRule> rider_rules;
  };

  /// Validates the partition and per-thing thresholds; throws Error on violation.
  explicit ClassTaxonomy(Spec spec);

  /// Micro-taxonomy used by the synthetic generator:
  /// 0 unlabeled (ignore), 1 road, 2 vegetation, 3 car, 4 person, 5 bicycle,
  /// 6 bicyclist, 7 motorcycle, 8 motorcyclist.
  static ClassTaxonomy micro();

  std::size_t num_classes() const noexcept { return spec_.class_names.size(); }
  ClassId ignore_id() const noexcept { return spec_.ignore_id; }
  bool is_thing(ClassId c) const noexcept;
  bool is_stuff(ClassId c) const noexcept;
  bool is_ignore(ClassId c) const noexcept { return c == spec_.ignore_id; }
  bool valid(ClassId c) const noexcept { return c >= 0 && static_cast<std::size_t>(c) < num_classes(); }

  const std::vector<ClassId>& thing_ids() const noexcept { return spec_.thing_ids; }
  const std::vector<ClassId>& stuff_ids() const noexcept { return spec_.stuff_ids; }
  const std::string& name(ClassId c) const;
  double max_extent(ClassId thing) const;
  double merge_eps(ClassId thing) const;
  const std::vector<RiderRule>& rider_rules() const noexcept { return spec_.rider_rules; }
  const Spec& spec() const noexcept { return spec_; }

 private:
  Spec spec_;
  std::vector<char> kind_;  // per class: 's', 't' or 'i'
};

/// Point cloud with per-point semantic and instance ground truth.
class Scene {
 public:
  Scene() = default;
  /// Throws Error when lengths differ, a point is non-finite, a positive instance id sits on a
  /// non-thing class, or one instance id spans several classes.
  Scene(std::vector<Point3> points, std::vector<ClassId> sem_gt, std::vector<InstanceId> inst_gt,
        const ClassTaxonomy& taxonomy);

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point3>& points() const noexcept { return points_; }
  const std::vector<ClassId>& sem_gt() const noexcept { return sem_gt_; }
  const std::vector<InstanceId>& inst_gt() const noexcept { return inst_gt_; }

  /// Distinct positive instance ids, ascending.
  std::vector<InstanceId> instance_ids() const;

 private:
  std::vector<Point3> points_;
  std::vector<ClassId> sem_gt_;
  std::vector<InstanceId> inst_gt_;
};

/// Per-point semantic and instance-cluster distributions.
class Prediction {
 public:
  Prediction() = default;
  /// Rows must be non-negative and sum to 1 within 1e-6; both matrices share a row count.
  Prediction(RowMatrix sem_prob, RowMatrix inst_prob);

  std::size_t size() const noexcept { return static_cast<std::size_t>(sem_prob_.rows()); }
  std::size_t num_classes() const noexcept { return static_cast<std::size_t>(sem_prob_.cols()); }
  std::size_t num_clusters() const noexcept { return static_cast<std::size_t>(inst_prob_.cols()); }
  const RowMatrix& sem_prob() const noexcept { return sem_prob_; }
  const RowMatrix& inst_prob() const noexcept { return inst_prob_; }

 private:
  RowMatrix sem_prob_;
  RowMatrix inst_prob_;
};

/// Fused panoptic output: semantic class and instance id (0 = none) per point.
class PanopticLabel {
 public:
  PanopticLabel() = default;
  /// Validated constructor: instance ids only on thing classes, one class per instance id.
  PanopticLabel(std::vector<ClassId> sem, std::vector<InstanceId> inst, const ClassTaxonomy& taxonomy);

  std::size_t size() const noexcept { return sem_.size(); }
  const std::vector<ClassId>& sem() const noexcept { return sem_; }
  const std::vector<InstanceId>& inst() const noexcept { return inst_; }

  bool operator==(const PanopticLabel&) const = default;

 private:
  std::vector<ClassId> sem_;
  std::vector<InstanceId> inst_;
};

/// Throws Error if (sem, inst) violate the PanopticLabel invariants.
void check_panoptic(std::span<const ClassId> sem, std::span<const InstanceId> inst,
                    const ClassTaxonomy& taxonomy);

struct HardLabels {
  std::vector<ClassId> sem;
  std::vector<std::uint32_t> cluster;
};

/// Per-row argmax of both distributions, ties to the lowest index.
HardLabels hard_labels(const Prediction& pred);

/// Row argmax with lowest-index tie-break.
std::vector<std::uint32_t> row_argmax(const RowMatrix& m);

/// Row-wise softmax of logits.
RowMatrix softmax_rows(const RowMatrix& logits);

/// Chains a gradient w.r.t. softmax probabilities back to the logits.
RowMatrix softmax_backward(const RowMatrix& prob, const RowMatrix& grad_prob);

}  // namespace panclust
