// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "panclust/core.hpp"

namespace panclust {

struct ClassScores {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double iou = 0.0;  // semantic IoU
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool present = false;  // some segment of the class exists in prediction or ground truth
};

struct PanopticReport {
  std::vector<ClassScores> per_class;  // indexed by class id; ignore class stays empty
  double pq = 0.0, sq = 0.0, rq = 0.0, pq_dagger = 0.0;
  double pq_th = 0.0, sq_th = 0.0, rq_th = 0.0;
  double pq_st = 0.0, sq_st = 0.0, rq_st = 0.0;
  double miou = 0.0;
};

/// Accumulates matching statistics over scenes. Points whose ground truth is the ignore class
/// are dropped from both sides; segments match when IoU > 0.5.
class PanopticEvaluator {
 public:
  explicit PanopticEvaluator(const ClassTaxonomy& taxonomy);

  void add(std::span<const ClassId> pred_sem, std::span<const InstanceId> pred_inst,
           std::span<const ClassId> gt_sem, std::span<const InstanceId> gt_inst);
  void add(const PanopticLabel& pred, const Scene& gt) { add(pred.sem(), pred.inst(), gt.sem_gt(), gt.inst_gt()); }
  /// Associative; merging in a fixed order gives bit-identical reports.
  void merge(const PanopticEvaluator& other);

  PanopticReport report() const;

 private:
  struct Stats {
    std::size_t tp = 0, fp = 0, fn = 0;
    double iou_sum = 0.0;
    std::size_t intersection = 0, union_ = 0;
  };
  const ClassTaxonomy* taxonomy_;
  std::vector<Stats> stats_;
};

PanopticReport evaluate(const PanopticLabel& pred, const Scene& gt, const ClassTaxonomy& taxonomy);

/// Flat "key value" lines: aggregates first, then per-class rows.
std::string report_table(const PanopticReport& report, const ClassTaxonomy& taxonomy);
/// JSON document with the same content (format documented in docs/formats.md).
std::string report_json(const PanopticReport& report, const ClassTaxonomy& taxonomy);

}  // namespace panclust
