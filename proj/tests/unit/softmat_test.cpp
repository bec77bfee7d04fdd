// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace panclust;
using testing_util::matrix;

namespace {

std::vector<Cell> cells(std::initializer_list<std::pair<std::size_t, std::size_t>> list) {
  std::vector<Cell> out;
  for (auto [r, c] : list) out.push_back({r, c});
  return out;
}

}  // namespace

TEST(SoftMatrix, OneHotObject) {
  const std::vector<InstanceId> gt = {1, 1};
  const auto s = build_soft_matrix(gt, matrix({{0, 0, 1}, {0, 0, 1}}));
  ASSERT_EQ(s.rows(), 1u);
  EXPECT_EQ(s.values, matrix({{0, 0, 1}}));
}

TEST(SoftMatrix, AveragesPointRows) {
  const std::vector<InstanceId> gt = {1, 1};
  const auto s = build_soft_matrix(gt, matrix({{1, 0, 0}, {0, 1, 0}}));
  EXPECT_TRUE(s.values.isApprox(matrix({{0.5, 0.5, 0}})));
}

TEST(SoftMatrix, ThreeObjectsFiveClustersShape) {
  Rng rng(1);
  const std::vector<InstanceId> gt = {0, 3, 3, 9, 1, 1, 0, 9};
  const auto s = build_soft_matrix(gt, testing_util::random_distributions(rng, gt.size(), 5));
  EXPECT_EQ(s.rows(), 3u);
  EXPECT_EQ(s.cols(), 5u);
  EXPECT_EQ(s.gt_ids, (std::vector<InstanceId>{1, 3, 9}));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(s.values.row(r).sum(), 1.0, 1e-12);
  EXPECT_EQ(s.point_index[1], (std::vector<std::size_t>{1, 2}));
}

TEST(SoftMatrix, EmptyWhenNoObjects) {
  const std::vector<InstanceId> gt = {0, 0};
  const auto s = build_soft_matrix(gt, matrix({{0.5, 0.5}, {1, 0}}));
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.cols(), 2u);
  EXPECT_TRUE(column_maxima(s).empty());
}

TEST(SoftMatrix, RejectsLengthMismatch) {
  const std::vector<InstanceId> gt = {1};
  EXPECT_THROW(build_soft_matrix(gt, matrix({{1, 0}, {0, 1}})), Error);
}

TEST(ColumnMaxima, Examples) {
  EXPECT_EQ(column_maxima(soft_matrix_from_values(matrix({{1, 0}, {0, 1}}))), cells({{0, 0}, {1, 1}}));
  EXPECT_EQ(column_maxima(soft_matrix_from_values(matrix({{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}}))),
            cells({{0, 0}, {1, 1}, {1, 2}}));
  EXPECT_EQ(column_maxima(soft_matrix_from_values(matrix({{0.5, 0.5}, {0.5, 0.5}}))), cells({{0, 0}, {0, 1}}));
}

TEST(ColumnMaxima, AgreesWithOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto s = soft_matrix_from_values(testing_util::random_distributions(rng, g, n));
    const auto expect = oracle::column_maxima(testing_util::to_grid(s.values));
    const auto got = column_maxima(s);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].row, expect[k].first);
      EXPECT_EQ(got[k].col, expect[k].second);
    }
  }
}

TEST(SoftMatrixProperty, SumEqualsObjectCount) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = static_cast<std::size_t>(rng.uniform_int(1, 40));
    std::vector<InstanceId> gt(p);
    for (auto& id : gt) id = static_cast<InstanceId>(rng.uniform_int(0, 5));
    const auto s = build_soft_matrix(gt, testing_util::random_distributions(rng, p, 7));
    EXPECT_NEAR(s.values.sum(), static_cast<double>(s.rows()), 1e-9);
  }
}

TEST(SoftMatrixProperty, PointOrderInvariant) {
  Rng rng(12);
  const std::vector<InstanceId> gt = {2, 0, 2, 5, 5, 5, 2, 0, 1};
  const auto prob = testing_util::random_distributions(rng, gt.size(), 4);
  const auto base = build_soft_matrix(gt, prob);
  std::vector<InstanceId> gt2(gt.rbegin(), gt.rend());
  RowMatrix prob2 = prob.colwise().reverse();
  const auto flipped = build_soft_matrix(gt2, prob2);
  EXPECT_TRUE(flipped.values.isApprox(base.values, 1e-12));
  EXPECT_EQ(flipped.gt_ids, base.gt_ids);
}

TEST(SoftMatrixProperty, LinearInPoints) {
  // S of a concatenation equals the size-weighted merge of the parts' rows
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6;
    const auto pa = static_cast<std::size_t>(rng.uniform_int(1, 15)), pb = static_cast<std::size_t>(rng.uniform_int(1, 15));
    std::vector<InstanceId> ga(pa), gb(pb);
    for (auto& id : ga) id = static_cast<InstanceId>(rng.uniform_int(1, 3));
    for (auto& id : gb) id = static_cast<InstanceId>(rng.uniform_int(1, 3));
    const auto a = testing_util::random_distributions(rng, pa, n), b = testing_util::random_distributions(rng, pb, n);
    std::vector<InstanceId> gab(ga);
    gab.insert(gab.end(), gb.begin(), gb.end());
    RowMatrix ab(static_cast<Eigen::Index>(pa + pb), static_cast<Eigen::Index>(n));
    ab << a, b;
    const auto whole = build_soft_matrix(gab, ab);
    const auto sa = build_soft_matrix(ga, a), sb = build_soft_matrix(gb, b);
    for (std::size_t r = 0; r < whole.rows(); ++r) {
      const auto id = whole.gt_ids[r];
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
      double count = 0;
      for (const auto* part : {&sa, &sb})
        for (std::size_t q = 0; q < part->rows(); ++q)
          if (part->gt_ids[q] == id) {
            const auto k = static_cast<double>(part->point_index[q].size());
            sum += k * part->values.row(static_cast<Eigen::Index>(q));
            count += k;
          }
      EXPECT_TRUE(whole.values.row(static_cast<Eigen::Index>(r)).isApprox(sum / count, 1e-12));
    }
  }
}

TEST(ChainToPoints, DistributesByObjectSize) {
  const std::vector<InstanceId> gt = {1, 0, 1, 2};
  const auto s = build_soft_matrix(gt, matrix({{1, 0}, {1, 0}, {0, 1}, {0, 1}}));
  const auto g = chain_to_points(s, matrix({{2, 4}, {6, 8}}), 4);
  EXPECT_EQ(g, matrix({{1, 2}, {0, 0}, {1, 2}, {6, 8}}));
}
