// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "panclust/core.hpp"

namespace panclust::io {

namespace fs = std::filesystem;

/// Consecutive little-endian float32 quadruples (x, y, z, remission). A missing remission is
/// written as 0. Throws Error(Io) with the byte offset of a truncated tail.
std::vector<Point3> read_velodyne_bin(const fs::path& path);
void write_velodyne_bin(const fs::path& path, const std::vector<Point3>& points);

struct RawLabels {
  std::vector<std::uint32_t> sem;   // lower 16 bits
  std::vector<std::uint32_t> inst;  // upper 16 bits
};

/// One little-endian uint32 per point: semantic id in the low half, instance id in the high
/// half. `expected_points` (when set) must match the word count.
RawLabels read_labels(const fs::path& path, std::optional<std::size_t> expected_points = std::nullopt);
void write_labels(const fs::path& path, const RawLabels& labels);

std::uint32_t pack_label(std::uint32_t sem, std::uint32_t inst);
RawLabels unpack_labels(std::span<const std::uint32_t> words);

/// Same packed encoding. Throws Error when an id does not fit in 16 bits.
void write_panoptic(const fs::path& path, const PanopticLabel& label);
PanopticLabel read_panoptic(const fs::path& path, const ClassTaxonomy& taxonomy,
                            std::optional<std::size_t> expected_points = std::nullopt);

/// Raw dataset ids -> evaluated class ids. Unmapped ids go to `fallback`.
struct LabelMap {
  std::map<std::uint32_t, ClassId> table;
  ClassId fallback = 0;

  ClassId operator()(std::uint32_t raw) const;
  bool empty() const { return table.empty(); }
};

/// Points + labels, remapped through `map` (identity when empty). Thing-class points keep
/// their instance id, every other point gets 0.
Scene load_kitti_scene(const fs::path& bin, const fs::path& label, const ClassTaxonomy& taxonomy,
                       const LabelMap& map = {});
void save_kitti_scene(const fs::path& bin, const fs::path& label, const Scene& scene);

/// Versioned binary scene container ("PCSCENE" magic, little-endian; see docs/formats.md).
void write_scene(const fs::path& path, const Scene& scene);
Scene read_scene(const fs::path& path, const ClassTaxonomy& taxonomy);

/// Whole-file helpers shared by the codecs.
std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);

}  // namespace panclust::io
