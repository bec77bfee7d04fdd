// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "panclust/core.hpp"

namespace panclust::synth {

/// Shape of one thing class: an ellipsoidal point blob with horizontal semi-axis `radius` and
/// vertical extent `height`, centered at `z_center` above the ground.
struct ThingSpec {
  ClassId cls = 3;
  double radius = 2.0;
  double height = 1.5;
  double z_center = 0.85;
  std::size_t points_min = 30;
  std::size_t points_max = 60;
  double min_separation = 6.0;  // between this object's centroid and any other
  double weight = 1.0;          // relative frequency in the class mix
};

enum class Placement {
  Uniform,  // anywhere in the scene disc
  Slots,    // jittered cells of a regular grid centered on the sensor
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t objects_min = 2;
  std::size_t objects_max = 5;
  std::vector<ThingSpec> things;

  ClassId ground_class = 1;
  std::size_t ground_points_min = 100;
  std::size_t ground_points_max = 120;
  ClassId blob_class = 2;
  std::size_t blobs_min = 0;
  std::size_t blobs_max = 2;
  std::size_t blob_points = 25;
  double blob_radius = 2.0;
  double blob_z_center = 3.0;

  double scene_radius = 50.0;
  double noise_sigma = 0.03;
  double occlusion = 0.0;  // fraction of each object's points (farthest from the sensor) removed
  std::size_t max_points = 0;  // 0 = unlimited; otherwise ground points are dropped to fit

  Placement placement = Placement::Uniform;
  std::size_t slot_rows = 4;
  std::size_t slot_cols = 4;
  double slot_spacing = 12.0;
  double slot_jitter = 1.5;

  std::size_t max_retries = 200;

  /// Default class mix over the micro taxonomy.
  static SynthConfig micro_defaults();
  void validate(const ClassTaxonomy& taxonomy) const;
};

/// Deterministic in (config.seed, index). Throws Error when objects cannot be placed.
Scene generate(const SynthConfig& config, std::size_t index, const ClassTaxonomy& taxonomy);

/// Ground truth with every instance cut into `parts` pieces of equal point count along its
/// longest bounding-box axis. parts = 1 returns the ground truth unchanged.
PanopticLabel make_fragmented(const Scene& scene, std::size_t parts, const ClassTaxonomy& taxonomy);

/// Ground truth with same-class instances merged pairwise in ascending id order
/// (1st+2nd, 3rd+4th, ...); the lower id survives.
PanopticLabel make_merged(const Scene& scene, const ClassTaxonomy& taxonomy);

/// Ground-truth labels as a PanopticLabel.
PanopticLabel ground_truth_label(const Scene& scene, const ClassTaxonomy& taxonomy);

}  // namespace panclust::synth
