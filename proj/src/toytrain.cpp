// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/toytrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <tuple>

#include "panclust/dataio.hpp"
#include "panclust/fusion.hpp"
#include "panclust/random.hpp"

namespace panclust {

RowMatrix point_features(std::span<const Point3> points, const FeatureConfig& config) {
  const auto n = points.size();
  RowMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(FeatureConfig::kWidth));
  const double s = config.coord_scale;
  const std::size_t k = n > 1 ? std::min(config.neighbors, n - 1) : 0;

  // (squared distance, x, y, z) ordering keeps the neighbour set independent of point order
  using Key = std::tuple<double, double, double, double>;
  std::vector<std::pair<Key, std::size_t>> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[i];
    double mx = p.x, my = p.y, mz = p.z, mean_dist = 0.0, spread = 0.0, hspread = 0.0;
    if (k > 0) {
      cand.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto& q = points[j];
        const double d2 = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y) + (q.z - p.z) * (q.z - p.z);
        cand.push_back({{d2, q.x, q.y, q.z}, j});
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                        [](const auto& a, const auto& b) { return a.first < b.first; });
      mx = my = mz = 0.0;
      for (std::size_t m = 0; m < k; ++m) {
        const auto& q = points[cand[m].second];
        mx += q.x, my += q.y, mz += q.z;
        mean_dist += std::sqrt(std::get<0>(cand[m].first));
      }
      const double inv = 1.0 / static_cast<double>(k);
      mx *= inv, my *= inv, mz *= inv, mean_dist *= inv;
      for (std::size_t m = 0; m < k; ++m) {
        const auto& q = points[cand[m].second];
        spread += (q.z - mz) * (q.z - mz) * inv;
        hspread += ((q.x - mx) * (q.x - mx) + (q.y - my) * (q.y - my)) * inv;
      }
      spread = std::sqrt(spread);
      hspread = std::sqrt(hspread);
    }
    const auto r = static_cast<Eigen::Index>(i);
    f(r, 0) = p.x / s;
    f(r, 1) = p.y / s;
    f(r, 2) = p.z;
    f(r, 3) = mx - p.x;
    f(r, 4) = my - p.y;
    f(r, 5) = mz - p.z;
    f(r, 6) = mean_dist;
    f(r, 7) = spread;
    f(r, 8) = hspread;
  }
  return f;
}

namespace {

Dense glorot(Eigen::Index in, Eigen::Index out, Rng& rng) {
  Dense d{RowMatrix(in, out), Eigen::RowVectorXd::Zero(out)};
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index r = 0; r < in; ++r)
    for (Eigen::Index c = 0; c < out; ++c) d.weight(r, c) = rng.uniform(-a, a);
  return d;
}

Dense zero_layer(Eigen::Index in, Eigen::Index out) {
  return {RowMatrix::Zero(in, out), Eigen::RowVectorXd::Zero(out)};
}

RowMatrix affine(const RowMatrix& x, const Dense& d) {
  RowMatrix y = x * d.weight;
  y.rowwise() += d.bias;
  return y;
}

RowMatrix tanh_of(const RowMatrix& a) { return a.array().tanh().matrix(); }

struct Activations {
  RowMatrix h1, h2, sem_prob, skip, h3, inst_prob;
};

Activations run(const ToyModel& m, const RowMatrix& x) {
  Activations a;
  a.h1 = tanh_of(affine(x, m.trunk1));
  a.h2 = tanh_of(affine(a.h1, m.trunk2));
  a.sem_prob = softmax_rows(affine(a.h2, m.sem));
  a.skip.resize(x.rows(), a.h2.cols() + a.sem_prob.cols());
  a.skip << a.h2, a.sem_prob;
  a.h3 = tanh_of(affine(a.skip, m.inst1));
  a.inst_prob = softmax_rows(affine(a.h3, m.inst2));
  return a;
}

void check_input(const ToyModel& m, const RowMatrix& features) {
  if (features.cols() != m.trunk1.in())
    fail("model expects " + std::to_string(m.trunk1.in()) + " features, got " + std::to_string(features.cols()));
}

}  // namespace

ToyModel ToyModel::init(std::size_t num_classes, std::size_t num_clusters, std::size_t hidden, std::uint64_t seed,
                        FeatureConfig features) {
  if (num_classes == 0 || num_clusters == 0 || hidden == 0) fail("model: empty layer");
  Rng rng(seed, 0x696e6974ull);
  const auto c = static_cast<Eigen::Index>(num_classes), n = static_cast<Eigen::Index>(num_clusters),
             h = static_cast<Eigen::Index>(hidden), in = static_cast<Eigen::Index>(FeatureConfig::kWidth);
  ToyModel m;
  m.features = features;
  m.trunk1 = glorot(in, h, rng);
  m.trunk2 = glorot(h, h, rng);
  m.sem = glorot(h, c, rng);
  m.inst1 = glorot(h + c, h, rng);
  m.inst2 = glorot(h, n, rng);
  return m;
}

ToyModel ToyModel::zeros(std::size_t num_classes, std::size_t num_clusters, std::size_t hidden,
                         FeatureConfig features) {
  const auto c = static_cast<Eigen::Index>(num_classes), n = static_cast<Eigen::Index>(num_clusters),
             h = static_cast<Eigen::Index>(hidden), in = static_cast<Eigen::Index>(FeatureConfig::kWidth);
  ToyModel m;
  m.features = features;
  m.trunk1 = zero_layer(in, h);
  m.trunk2 = zero_layer(h, h);
  m.sem = zero_layer(h, c);
  m.inst1 = zero_layer(h + c, h);
  m.inst2 = zero_layer(h, n);
  return m;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* l : layers()) n += static_cast<std::size_t>(l->weight.size() + l->bias.size());
  return n;
}

std::vector<double> ToyModel::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto* l : layers()) {
    out.insert(out.end(), l->weight.data(), l->weight.data() + l->weight.size());
    out.insert(out.end(), l->bias.data(), l->bias.data() + l->bias.size());
  }
  return out;
}

void ToyModel::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) fail("model: parameter count mismatch");
  std::size_t pos = 0;
  for (auto* l : layers()) {
    std::memcpy(l->weight.data(), values.data() + pos, sizeof(double) * static_cast<std::size_t>(l->weight.size()));
    pos += static_cast<std::size_t>(l->weight.size());
    std::memcpy(l->bias.data(), values.data() + pos, sizeof(double) * static_cast<std::size_t>(l->bias.size()));
    pos += static_cast<std::size_t>(l->bias.size());
  }
}

Prediction forward_features(const ToyModel& model, const RowMatrix& features) {
  check_input(model, features);
  auto a = run(model, features);
  return Prediction(std::move(a.sem_prob), std::move(a.inst_prob));
}

Prediction forward(const ToyModel& model, std::span<const Point3> points) {
  return forward_features(model, point_features(points, model.features));
}

ModelGradient loss_and_gradient(const ToyModel& model, const RowMatrix& features, const Scene& scene,
                                const LossWeights& weights, const ClassTaxonomy& taxonomy,
                                const TotalLossOptions& options) {
  check_input(model, features);
  const auto a = run(model, features);
  ModelGradient out;
  out.loss = total_loss(scene, Prediction(a.sem_prob, a.inst_prob), weights, taxonomy, options);

  const RowMatrix g_inst_logits = softmax_backward(a.inst_prob, out.loss.inst_grad);
  const RowMatrix g_sem_logits = softmax_backward(a.sem_prob, out.loss.sem_grad);

  const RowMatrix g_inst2_w = a.h3.transpose() * g_inst_logits;
  const Eigen::RowVectorXd g_inst2_b = g_inst_logits.colwise().sum();
  const RowMatrix g_a3 = ((g_inst_logits * model.inst2.weight.transpose()).array() * (1.0 - a.h3.array().square())).matrix();
  const RowMatrix g_inst1_w = a.skip.transpose() * g_a3;
  const Eigen::RowVectorXd g_inst1_b = g_a3.colwise().sum();
  const auto width = static_cast<Eigen::Index>(model.trunk_width());
  // the semantic-probability half of the skip input is detached
  const RowMatrix g_h2_inst = g_a3 * model.inst1.weight.topRows(width).transpose();

  const RowMatrix g_sem_w = a.h2.transpose() * g_sem_logits;
  const Eigen::RowVectorXd g_sem_b = g_sem_logits.colwise().sum();
  const RowMatrix g_h2 = g_sem_logits * model.sem.weight.transpose() + g_h2_inst;
  const RowMatrix g_a2 = (g_h2.array() * (1.0 - a.h2.array().square())).matrix();
  const RowMatrix g_trunk2_w = a.h1.transpose() * g_a2;
  const Eigen::RowVectorXd g_trunk2_b = g_a2.colwise().sum();
  const RowMatrix g_a1 = ((g_a2 * model.trunk2.weight.transpose()).array() * (1.0 - a.h1.array().square())).matrix();
  const RowMatrix g_trunk1_w = features.transpose() * g_a1;
  const Eigen::RowVectorXd g_trunk1_b = g_a1.colwise().sum();

  out.grad.reserve(model.parameter_count());
  auto push = [&out](const RowMatrix& w, const Eigen::RowVectorXd& b) {
    out.grad.insert(out.grad.end(), w.data(), w.data() + w.size());
    out.grad.insert(out.grad.end(), b.data(), b.data() + b.size());
  };
  push(g_trunk1_w, g_trunk1_b);
  push(g_trunk2_w, g_trunk2_b);
  push(g_sem_w, g_sem_b);
  push(g_inst1_w, g_inst1_b);
  push(g_inst2_w, g_inst2_b);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("train: learning_rate must be positive");
  if (batch_size < 1) fail("train: batch_size must be at least 1");
  if (!(momentum >= 0 && momentum < 1)) fail("train: momentum must lie in [0, 1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) fail("train: adam_beta2 must lie in [0, 1)");
  if (!(grad_clip >= 0)) fail("train: grad_clip must be non-negative");
  if (num_clusters < 1 || hidden < 1) fail("train: num_clusters and hidden must be positive");
  if (!(features.coord_scale > 0) || !std::isfinite(features.coord_scale)) fail("train: coord_scale must be positive");
  weights.validate();
}

TrainResult train(const TrainConfig& config, const SceneStream& stream, const ClassTaxonomy& taxonomy,
                  const std::function<void(std::size_t, double)>& progress) {
  config.validate();
  TrainResult result{ToyModel::init(taxonomy.num_classes(), config.num_clusters, config.hidden, config.seed,
                                    config.features),
                     {}};
  if (config.iterations == 0) return result;

  LossWeights weights = config.weights;
  if (weights.class_weights.empty()) {
    std::vector<Scene> sample;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, config.class_weight_scenes); ++i) sample.push_back(stream(i));
    weights.class_weights = inverse_log_frequency_weights(sample, taxonomy);
  }

  auto& model = result.model;
  std::vector<double> params = model.parameters();
  std::vector<double> velocity(params.size(), 0.0), second(params.size(), 0.0), grad(params.size());
  result.loss_curve.reserve(config.iterations);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    weights.w_frag = it < config.frag_delay ? 0.0 : config.weights.w_frag;
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Scene scene = stream(it * config.batch_size + b);
      if (scene.size() == 0) continue;
      ModelGradient mg;
      try {
        mg = loss_and_gradient(model, point_features(scene.points(), model.features), scene, weights, taxonomy);
      } catch (const Error& e) {
        // valid scenes only fail here when activations overflowed
        throw TrainingDiverged(it, "training diverged at iteration " + std::to_string(it) + ": " + e.what());
      }
      loss += mg.loss.value;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += mg.grad[k];
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    loss *= inv;
    double norm = 0.0;
    for (auto& g : grad) {
      g *= inv;
      norm += g * g;
    }
    norm = std::sqrt(norm);
    if (!std::isfinite(loss) || !std::isfinite(norm))
      throw TrainingDiverged(it, "training diverged at iteration " + std::to_string(it) + ": loss " +
                                     std::to_string(loss) + ", gradient norm " + std::to_string(norm));
    result.loss_curve.push_back(loss);

    const double scale = (config.grad_clip > 0 && norm > config.grad_clip) ? config.grad_clip / norm : 1.0;
    const double t = static_cast<double>(it + 1);
    const double bias1 = 1.0 - std::pow(config.momentum, t), bias2 = 1.0 - std::pow(config.adam_beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double g = grad[k] * scale;
      if (config.optimizer == Optimizer::Adam) {
        velocity[k] = config.momentum * velocity[k] + (1.0 - config.momentum) * g;
        second[k] = config.adam_beta2 * second[k] + (1.0 - config.adam_beta2) * g * g;
        params[k] -= config.learning_rate * (velocity[k] / bias1) / (std::sqrt(second[k] / bias2) + config.adam_eps);
      } else if (config.optimizer == Optimizer::Momentum) {
        velocity[k] = config.momentum * velocity[k] - config.learning_rate * g;
        params[k] += velocity[k];
      } else {
        params[k] -= config.learning_rate * g;
      }
    }
    if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); }))
      throw TrainingDiverged(it, "training diverged at iteration " + std::to_string(it) + ": non-finite parameters");
    model.set_parameters(params);
    if (progress) progress(it, loss);
  }
  return result;
}

PanopticLabel infer(const ToyModel& model, const Scene& scene, const ClassTaxonomy& taxonomy) {
  if (model.num_classes() != taxonomy.num_classes()) fail("infer: model class count differs from taxonomy");
  if (scene.size() == 0) return PanopticLabel({}, {}, taxonomy);
  const auto h = hard_labels(forward(model, scene.points()));
  return fuse(h.sem, h.cluster, taxonomy);
}

namespace {

constexpr char kModelMagic[8] = {'P', 'C', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& b, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

struct Cursor {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;
  std::string what;
  void need(std::size_t n) {
    if (b.size() - pos < n) fail_io(what + ": truncated checkpoint at byte offset " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model) {
  std::vector<std::uint8_t> b(kModelMagic, kModelMagic + sizeof kModelMagic);
  put_u32(b, kModelVersion);
  put_u32(b, static_cast<std::uint32_t>(model.features.neighbors));
  put_f64(b, model.features.coord_scale);
  const auto layers = model.layers();
  put_u32(b, static_cast<std::uint32_t>(layers.size()));
  for (const auto* l : layers) {
    put_u32(b, static_cast<std::uint32_t>(l->in()));
    put_u32(b, static_cast<std::uint32_t>(l->out()));
  }
  for (double v : model.parameters()) put_f64(b, v);
  io::write_bytes(path, b);
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  Cursor c{bytes, 0, path.string()};
  c.need(sizeof kModelMagic);
  if (std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0) fail_io(path.string() + ": not a model checkpoint");
  c.pos = sizeof kModelMagic;
  if (const auto v = c.u32(); v != kModelVersion) fail_io(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  FeatureConfig features;
  features.neighbors = c.u32();
  features.coord_scale = c.f64();
  if (c.u32() != 5) fail_io(path.string() + ": unexpected layer count");
  std::uint32_t shape[5][2];
  for (auto& s : shape) s[0] = c.u32(), s[1] = c.u32();
  const std::size_t classes = shape[2][1], clusters = shape[4][1], hidden = shape[0][1];
  ToyModel m = ToyModel::zeros(classes, clusters, hidden, features);
  const auto layers = m.layers();
  for (std::size_t i = 0; i < 5; ++i)
    if (layers[i]->in() != shape[i][0] || layers[i]->out() != shape[i][1])
      fail_io(path.string() + ": layer " + std::to_string(i) + " shape does not match the toy architecture");
  std::vector<double> params(m.parameter_count());
  for (auto& p : params) p = c.f64();
  if (c.pos != bytes.size()) fail_io(path.string() + ": trailing bytes after parameters");
  m.set_parameters(params);
  return m;
}

}  // namespace panclust
