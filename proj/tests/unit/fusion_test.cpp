// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "panclust/fusion.hpp"

using namespace panclust;
using testing_util::micro;

TEST(Fuse, StuffGetsNoInstance) {
  const std::vector<ClassId> sem = {1, 2, 0, 3};
  const std::vector<std::uint32_t> cl = {4, 4, 4, 4};
  const auto out = fuse(sem, cl, micro());
  EXPECT_EQ(out.inst(), (std::vector<InstanceId>{0, 0, 0, 5}));
  EXPECT_EQ(out.sem(), sem);
}

TEST(Fuse, ThingPointsGetClusterPlusOne) {
  const std::vector<ClassId> sem = {3, 3, 4, 4};
  const std::vector<std::uint32_t> cl = {0, 0, 2, 7};
  EXPECT_EQ(fuse(sem, cl, micro()).inst(), (std::vector<InstanceId>{1, 1, 3, 8}));
}

TEST(Fuse, SplitsClusterSpanningClasses) {
  // cluster 1 holds cars and persons; cluster 0 holds persons and bicycles
  const std::vector<ClassId> sem = {3, 4, 4, 5, 3};
  const std::vector<std::uint32_t> cl = {1, 1, 0, 0, 1};
  const auto out = fuse(sem, cl, micro());
  // max id in use is 2; extras sorted by (class, cluster): (4, 1) -> 3, (5, 0) -> 4
  EXPECT_EQ(out.inst(), (std::vector<InstanceId>{2, 3, 1, 4, 2}));
}

TEST(Fuse, RejectsLengthMismatchAndBadClass) {
  EXPECT_THROW(fuse(std::vector<ClassId>{3}, std::vector<std::uint32_t>{0, 1}, micro()), Error);
  EXPECT_THROW(fuse(std::vector<ClassId>{42}, std::vector<std::uint32_t>{0}, micro()), Error);
}

TEST(Fuse, OutputAlwaysSatisfiesInvariants) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = static_cast<std::size_t>(rng.uniform_int(0, 40));
    std::vector<ClassId> sem(p);
    std::vector<std::uint32_t> cl(p);
    for (std::size_t i = 0; i < p; ++i) {
      sem[i] = static_cast<ClassId>(rng.uniform_int(0, 8));
      cl[i] = static_cast<std::uint32_t>(rng.uniform_int(0, 5));
    }
    const auto out = fuse(sem, cl, micro());
    EXPECT_NO_THROW(check_panoptic(out.sem(), out.inst(), micro()));
    // points sharing (cluster, class) share an instance, and vice versa
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        if (micro().is_thing(sem[a]) && micro().is_thing(sem[b]))
          EXPECT_EQ(out.inst()[a] == out.inst()[b], cl[a] == cl[b] && sem[a] == sem[b]);
  }
}
