// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "panclust/core.hpp"
#include "panclust/losses.hpp"

namespace panclust {

/// Per-point input: scaled coordinates, the offset to the mean of the k nearest neighbours, and
/// their mean distance plus vertical and horizontal spread (one aggregation round).
struct FeatureConfig {
  std::size_t neighbors = 8;
  double coord_scale = 20.0;  // meters per unit for x and y

  static constexpr std::size_t kWidth = 9;
};

RowMatrix point_features(std::span<const Point3> points, const FeatureConfig& config);

struct Dense {
  RowMatrix weight;        // in x out
  Eigen::RowVectorXd bias;  // out

  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }
};

/// Shared trunk (two tanh layers), a linear semantic head and a two-layer instance head fed
/// with the trunk features concatenated with the semantic probabilities. Gradients do not flow
/// back through that skip connection.
struct ToyModel {
  FeatureConfig features;
  Dense trunk1, trunk2, sem, inst1, inst2;

  std::size_t num_classes() const { return static_cast<std::size_t>(sem.out()); }
  std::size_t num_clusters() const { return static_cast<std::size_t>(inst2.out()); }
  std::size_t trunk_width() const { return static_cast<std::size_t>(trunk2.out()); }
  std::vector<Dense*> layers() { return {&trunk1, &trunk2, &sem, &inst1, &inst2}; }
  std::vector<const Dense*> layers() const { return {&trunk1, &trunk2, &sem, &inst1, &inst2}; }

  /// Glorot-uniform weights, zero biases.
  static ToyModel init(std::size_t num_classes, std::size_t num_clusters, std::size_t hidden, std::uint64_t seed,
                       FeatureConfig features = {});
  /// All parameters zero (forward yields uniform distributions).
  static ToyModel zeros(std::size_t num_classes, std::size_t num_clusters, std::size_t hidden,
                        FeatureConfig features = {});

  std::size_t parameter_count() const;
  /// Parameters flattened in layer order (weights row-major, then bias).
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);
};

Prediction forward(const ToyModel& model, std::span<const Point3> points);
Prediction forward_features(const ToyModel& model, const RowMatrix& features);

/// Gradient of total_loss w.r.t. every model parameter (flattened like parameters()).
struct ModelGradient {
  TotalLoss loss;
  std::vector<double> grad;
};
ModelGradient loss_and_gradient(const ToyModel& model, const RowMatrix& features, const Scene& scene,
                                const LossWeights& weights, const ClassTaxonomy& taxonomy,
                                const TotalLossOptions& options = {});

enum class Optimizer { Sgd, Momentum, Adam };

struct TrainConfig {
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  std::size_t iterations = 2000;
  std::size_t batch_size = 4;
  Optimizer optimizer = Optimizer::Momentum;
  double momentum = 0.9;   // momentum coefficient; Adam's first-moment decay
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
  std::size_t num_clusters = 16;
  std::size_t hidden = 32;
  FeatureConfig features;
  LossWeights weights;
  /// Iterations trained with w_frag = 0 before the fragmentation term is switched on.
  std::size_t frag_delay = 0;
  /// Scenes used to derive inverse-log-frequency class weights when weights.class_weights is empty.
  std::size_t class_weight_scenes = 64;

  void validate() const;
};

/// Scene by stream position; must be deterministic.
using SceneStream = std::function<Scene(std::size_t)>;

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_curve;  // mean total loss of each iteration's batch
};

/// Thrown when the loss becomes non-finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t iteration, const std::string& what)
      : Error(ErrorKind::Validation, what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Scene `iter * batch_size + b` of the stream feeds slot b of iteration `iter`.
/// `progress` (optional) is called after every iteration.
TrainResult train(const TrainConfig& config, const SceneStream& stream, const ClassTaxonomy& taxonomy,
                  const std::function<void(std::size_t, double)>& progress = {});

/// forward -> hard labels -> fusion; no post-processing.
PanopticLabel infer(const ToyModel& model, const Scene& scene, const ClassTaxonomy& taxonomy);

/// Checkpoint: "PCMODEL" magic, version, feature config, layer shapes, float64 parameters,
/// all little-endian (docs/formats.md).
void save_checkpoint(const std::filesystem::path& path, const ToyModel& model);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace panclust
