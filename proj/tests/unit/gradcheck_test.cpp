// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "panclust/gradcheck.hpp"

using namespace panclust;
using testing_util::matrix;

namespace {

LogitLoss sum_of_squares() {
  LogitLoss l;
  l.value = [](const RowMatrix& x) { return x.squaredNorm(); };
  l.gradient = [](const RowMatrix& x) -> RowMatrix { return 2.0 * x; };
  return l;
}

}  // namespace

TEST(FiniteDifference, AcceptsCorrectGradient) {
  const auto r = finite_difference_check(sum_of_squares(), matrix({{1, -2}, {0.5, 3}}), 1e-5, 1e-6);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.checked, 4u);
  EXPECT_EQ(r.excluded, 0u);
}

TEST(FiniteDifference, RejectsWrongGradient) {
  auto l = sum_of_squares();
  l.gradient = [](const RowMatrix& x) -> RowMatrix {
    RowMatrix g = 2.0 * x;
    g(1, 0) += 0.1;
    return g;
  };
  const auto r = finite_difference_check(l, matrix({{1, -2}, {0.5, 3}}), 1e-5, 1e-4);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_row, 1);
  EXPECT_EQ(r.worst_col, 0);
}

TEST(FiniteDifference, SkipsTieRows) {
  auto l = sum_of_squares();
  l.near_tie = [](const RowMatrix& x, double) { return std::vector<bool>(static_cast<std::size_t>(x.rows()), true); };
  const auto r = finite_difference_check(l, matrix({{1, 2}}), 1e-5, 1e-4);
  EXPECT_EQ(r.checked, 0u);
  EXPECT_EQ(r.excluded, 2u);
}

TEST(FiniteDifference, RejectsBadStep) {
  EXPECT_THROW(finite_difference_check(sum_of_squares(), matrix({{1}}), 0.0, 1e-4), Error);
  EXPECT_THROW(finite_difference_check(sum_of_squares(), matrix({{1}}), 0.1, 1e-4), Error);
}

TEST(LossKind, NamesRoundTrip) {
  for (auto k : {LossKind::Impurity, LossKind::Fragmentation, LossKind::CrossEntropy, LossKind::Lovasz,
                 LossKind::Total})
    EXPECT_EQ(parse_loss_kind(loss_kind_name(k)), k);
  EXPECT_THROW(parse_loss_kind("hinge"), Error);
}

class EveryLoss : public ::testing::TestWithParam<LossKind> {};

TEST_P(EveryLoss, AnalyticGradientMatchesDifferences) {
  const auto s = run_gradcheck(GetParam(), 20, 1e-5, 1e-4, 99);
  EXPECT_EQ(s.trials, 20u);
  EXPECT_EQ(s.failures, 0u) << "worst " << s.worst_rel_error;
  EXPECT_GT(s.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(Losses, EveryLoss,
                         ::testing::Values(LossKind::Impurity, LossKind::Fragmentation, LossKind::CrossEntropy,
                                           LossKind::Lovasz, LossKind::Total),
                         [](const auto& info) { return std::string(loss_kind_name(info.param)); });

TEST(GradCheckTrial, DeterministicInSeed) {
  const auto& tax = testing_util::micro();
  const auto a = random_gradcheck_trial(LossKind::Total, tax, 5), b = random_gradcheck_trial(LossKind::Total, tax, 5);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.scene.sem_gt(), b.scene.sem_gt());
  EXPECT_EQ(a.logits.cols(), static_cast<Eigen::Index>(tax.num_classes() + a.num_clusters));
}

TEST(TieDetection, FlagsNearlyEqualColumnEntries) {
  const auto s = soft_matrix_from_values(matrix({{0.5, 0.5}, {0.5, 0.5}}));
  const auto rows = soft_matrix_tie_rows(s, 1e-4, false);
  EXPECT_TRUE(rows[0]);
  EXPECT_TRUE(rows[1]);
  const auto clear = soft_matrix_tie_rows(soft_matrix_from_values(matrix({{0.9, 0.1}, {0.1, 0.9}})), 1e-4, false);
  EXPECT_FALSE(clear[0]);
  EXPECT_FALSE(clear[1]);
}
