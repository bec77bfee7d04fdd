// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "panclust/core.hpp"
#include "panclust/random.hpp"
#include "panclust/softmat.hpp"

namespace testing_util {

using namespace panclust;

inline const ClassTaxonomy& micro() {
  static const ClassTaxonomy tax = ClassTaxonomy::micro();
  return tax;
}

/// Random distribution rows (P x N) drawn from softmax of N(0, scale) logits.
inline RowMatrix random_distributions(Rng& rng, std::size_t rows, std::size_t cols, double scale = 2.0) {
  RowMatrix logits(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) logits(r, c) = rng.normal(0.0, scale);
  return softmax_rows(logits);
}

inline oracle::Grid to_grid(const RowMatrix& m) {
  oracle::Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

inline RowMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

/// Points on a line, one meter apart, all at z = 0.
inline std::vector<Point3> line_points(std::size_t n) {
  std::vector<Point3> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {static_cast<double>(i), 0.0, 0.0, {}};
  return pts;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("panclust-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct PanopticCase {
  std::vector<ClassId> gt_sem, pred_sem;
  std::vector<InstanceId> gt_inst, pred_inst;
};

/// Random labels over the micro taxonomy with at most `segments` instances per thing class on
/// each side. Predictions copy the ground truth with probability `agree`.
inline PanopticCase random_panoptic_case(Rng& rng, std::size_t points, std::size_t segments, double agree = 0.7) {
  const auto& tax = micro();
  PanopticCase c;
  auto draw = [&](std::vector<ClassId>& sem, std::vector<InstanceId>& inst) {
    const auto cls = static_cast<ClassId>(rng.uniform_int(0, static_cast<std::int64_t>(tax.num_classes()) - 1));
    sem.push_back(cls);
    inst.push_back(tax.is_thing(cls) ? static_cast<InstanceId>(rng.uniform_int(0, static_cast<std::int64_t>(segments)))
                                     : 0);
  };
  for (std::size_t p = 0; p < points; ++p) {
    draw(c.gt_sem, c.gt_inst);
    if (rng.uniform() < agree) {
      c.pred_sem.push_back(c.gt_sem.back());
      c.pred_inst.push_back(c.gt_inst.back());
    } else {
      draw(c.pred_sem, c.pred_inst);
    }
  }
  // thing instance ids must not be shared across classes
  for (auto* side : {&c.gt_inst, &c.pred_inst})
    for (std::size_t p = 0; p < points; ++p)
      if ((*side)[p] > 0) (*side)[p] += 100 * static_cast<InstanceId>(side == &c.gt_inst ? c.gt_sem[p] : c.pred_sem[p]);
  return c;
}

inline std::vector<char> class_kinds(const ClassTaxonomy& tax) {
  std::vector<char> kind(tax.num_classes());
  for (std::size_t c = 0; c < kind.size(); ++c) {
    const auto id = static_cast<ClassId>(c);
    kind[c] = tax.is_ignore(id) ? 'i' : tax.is_thing(id) ? 't' : 's';
  }
  return kind;
}

}  // namespace testing_util
