// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "panclust/core.hpp"
#include "panclust/dataio.hpp"
#include "panclust/losses.hpp"
#include "panclust/synth.hpp"
#include "panclust/toytrain.hpp"

namespace panclust {

/// Everything one experiment needs, loaded from a single YAML file (docs/formats.md).
/// Sections that are absent keep their defaults; unknown keys are rejected.
struct ExperimentConfig {
  ClassTaxonomy taxonomy = ClassTaxonomy::micro();
  synth::SynthConfig synth = synth::SynthConfig::micro_defaults();
  TrainConfig train;
  io::LabelMap label_map;

  /// Held-out scenes are drawn from the synth stream starting at this index.
  std::size_t eval_offset = 100000;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical YAML of the whole config; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& config);

}  // namespace panclust
