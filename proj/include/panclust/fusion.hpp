// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "panclust/core.hpp"

namespace panclust {

/// Masks instance predictions with the semantic prediction: stuff and ignore points get
/// instance 0, thing points get cluster + 1. A cluster spanning several thing classes is
/// split, the lowest class keeping cluster + 1 and the others receiving fresh ids above every
/// id in use (ascending by class, then by cluster).
PanopticLabel fuse(std::span<const ClassId> sem, std::span<const std::uint32_t> cluster,
                   const ClassTaxonomy& taxonomy);

}  // namespace panclust
