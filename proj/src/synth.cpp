// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "panclust/random.hpp"

namespace panclust::synth {

SynthConfig SynthConfig::micro_defaults() {
  SynthConfig c;
  c.things = {
      {3, 2.0, 1.5, 0.85, 30, 60, 6.0, 3.0},   // car
      {4, 0.35, 1.7, 0.95, 15, 30, 2.0, 2.0},  // person
      {5, 0.8, 1.0, 0.55, 15, 30, 3.0, 1.0},   // bicycle
      {6, 0.5, 1.7, 1.0, 15, 30, 3.0, 1.0},    // bicyclist
      {7, 1.0, 1.1, 0.6, 15, 30, 3.0, 1.0},    // motorcycle
      {8, 0.5, 1.7, 1.0, 15, 30, 3.0, 1.0},    // motorcyclist
  };
  return c;
}

void SynthConfig::validate(const ClassTaxonomy& taxonomy) const {
  if (!(scene_radius > 0)) fail("synth: scene_radius must be positive");
  if (objects_min > objects_max) fail("synth: objects_min > objects_max");
  if (objects_max > 0 && things.empty()) fail("synth: objects requested but no thing classes configured");
  if (ground_points_min > ground_points_max) fail("synth: ground_points_min > ground_points_max");
  if (blobs_min > blobs_max) fail("synth: blobs_min > blobs_max");
  if (!(noise_sigma >= 0)) fail("synth: noise_sigma must be non-negative");
  if (!(occlusion >= 0 && occlusion < 1)) fail("synth: occlusion must lie in [0, 1)");
  if (!taxonomy.is_stuff(ground_class) || !taxonomy.is_stuff(blob_class)) fail("synth: ground/blob classes must be stuff");
  if (placement == Placement::Slots && objects_max > slot_rows * slot_cols)
    fail("synth: more objects than slots");
  double total_weight = 0.0;
  for (const auto& t : things) {
    if (!taxonomy.is_thing(t.cls)) fail("synth: class " + std::to_string(t.cls) + " is not a thing class");
    if (!(t.radius > 0) || !(t.height > 0)) fail("synth: object extents must be positive");
    if (t.points_min < 1 || t.points_min > t.points_max) fail("synth: invalid object point range");
    if (!(t.weight >= 0)) fail("synth: class weights must be non-negative");
    total_weight += t.weight;
  }
  if (!things.empty() && !(total_weight > 0)) fail("synth: class weights sum to zero");
}

namespace {

struct Placed {
  double x, y;
  double separation;
  double radius;
};

Point3 ellipsoid_point(Rng& rng, double rx, double rz) {
  for (;;) {
    const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1), w = rng.uniform(-1, 1);
    if (u * u + v * v + w * w <= 1.0) return {u * rx, v * rx, w * rz, {}};
  }
}

Point3 clamped_noise(Rng& rng, double sigma) {
  Point3 n{rng.normal(0, sigma), rng.normal(0, sigma), rng.normal(0, sigma), {}};
  const double len = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
  if (len > 3 * sigma && len > 0) {
    const double f = 3 * sigma / len;
    n.x *= f, n.y *= f, n.z *= f;
  }
  return n;
}

const ThingSpec& pick_class(Rng& rng, const std::vector<ThingSpec>& things) {
  double total = 0.0;
  for (const auto& t : things) total += t.weight;
  double r = rng.uniform() * total;
  for (const auto& t : things) {
    if (r < t.weight) return t;
    r -= t.weight;
  }
  return things.back();
}

}  // namespace

Scene generate(const SynthConfig& config, std::size_t index, const ClassTaxonomy& taxonomy) {
  config.validate(taxonomy);
  Rng rng(config.seed, index);
  const double radius = config.scene_radius;

  const auto count = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(config.objects_min), static_cast<std::int64_t>(config.objects_max)));
  std::vector<const ThingSpec*> specs;
  for (std::size_t o = 0; o < count; ++o) specs.push_back(&pick_class(rng, config.things));

  std::vector<std::size_t> slots(config.slot_rows * config.slot_cols);
  std::iota(slots.begin(), slots.end(), 0);
  if (config.placement == Placement::Slots)
    for (std::size_t i = slots.size(); i > 1; --i)
      std::swap(slots[i - 1], slots[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

  auto slot_center = [&config](std::size_t slot) {
    const double ox = (static_cast<double>(config.slot_cols) - 1) / 2.0;
    const double oy = (static_cast<double>(config.slot_rows) - 1) / 2.0;
    return std::pair{(static_cast<double>(slot % config.slot_cols) - ox) * config.slot_spacing,
                     (static_cast<double>(slot / config.slot_cols) - oy) * config.slot_spacing};
  };

  std::vector<Placed> placed;
  for (std::size_t o = 0; o < count; ++o) {
    const auto& spec = *specs[o];
    bool ok = false;
    for (std::size_t attempt = 0; attempt < config.max_retries && !ok; ++attempt) {
      double x, y;
      if (config.placement == Placement::Slots) {
        auto [sx, sy] = slot_center(slots[o]);
        x = sx + rng.uniform(-config.slot_jitter, config.slot_jitter);
        y = sy + rng.uniform(-config.slot_jitter, config.slot_jitter);
      } else {
        const double r = (radius - spec.radius) * std::sqrt(rng.uniform());
        const double a = rng.uniform(0, 2 * std::numbers::pi);
        x = r * std::cos(a);
        y = r * std::sin(a);
      }
      if (std::hypot(x, y) + spec.radius > radius) continue;
      ok = std::all_of(placed.begin(), placed.end(), [&](const Placed& p) {
        return std::hypot(p.x - x, p.y - y) >= std::max(p.separation, spec.min_separation);
      });
      if (ok) placed.push_back({x, y, spec.min_separation, spec.radius});
    }
    if (!ok) fail("synth: could not place object " + std::to_string(o) + " after " +
                  std::to_string(config.max_retries) + " attempts (scene " + std::to_string(index) + ")");
  }

  const auto blobs = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(config.blobs_min), static_cast<std::int64_t>(config.blobs_max)));
  const double grid_half_x = (static_cast<double>(config.slot_cols) - 1) / 2.0 * config.slot_spacing +
                             config.slot_jitter + config.blob_radius + 1.0;
  const double grid_half_y = (static_cast<double>(config.slot_rows) - 1) / 2.0 * config.slot_spacing +
                             config.slot_jitter + config.blob_radius + 1.0;
  std::vector<std::pair<double, double>> blob_centers;
  for (std::size_t b = 0; b < blobs; ++b) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < config.max_retries && !ok; ++attempt) {
      const double r = (radius - config.blob_radius) * std::sqrt(rng.uniform());
      const double a = rng.uniform(0, 2 * std::numbers::pi);
      const double x = r * std::cos(a), y = r * std::sin(a);
      if (config.placement == Placement::Slots && std::abs(x) < grid_half_x && std::abs(y) < grid_half_y) continue;
      ok = std::all_of(placed.begin(), placed.end(),
                       [&](const Placed& p) {
                         return std::hypot(p.x - x, p.y - y) >= p.radius + config.blob_radius + 1.0;
                       }) &&
           std::all_of(blob_centers.begin(), blob_centers.end(), [&](const auto& c) {
             return std::hypot(c.first - x, c.second - y) >= 2 * config.blob_radius;
           });
      if (ok) blob_centers.emplace_back(x, y);
    }
    if (!ok) fail("synth: could not place background blob " + std::to_string(b) + " (scene " + std::to_string(index) + ")");
  }

  std::vector<Point3> pts;
  std::vector<ClassId> sem;
  std::vector<InstanceId> inst;
  auto emit = [&](const Point3& p, ClassId c, InstanceId i) {
    pts.push_back({p.x, p.y, p.z, std::clamp(rng.uniform(0.1, 0.9), 0.0, 1.0)});
    sem.push_back(c);
    inst.push_back(i);
  };

  for (std::size_t o = 0; o < count; ++o) {
    const auto& spec = *specs[o];
    const auto n = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.points_min), static_cast<std::int64_t>(spec.points_max)));
    std::vector<Point3> obj;
    for (std::size_t k = 0; k < n; ++k) {
      const auto e = ellipsoid_point(rng, spec.radius, spec.height / 2);
      const auto noise = clamped_noise(rng, config.noise_sigma);
      obj.push_back({placed[o].x + e.x + noise.x, placed[o].y + e.y + noise.y, spec.z_center + e.z + noise.z, {}});
    }
    const auto drop = std::min(n - 1, static_cast<std::size_t>(std::floor(config.occlusion * static_cast<double>(n))));
    if (drop > 0) {
      std::stable_sort(obj.begin(), obj.end(),
                       [](const Point3& a, const Point3& b) { return std::hypot(a.x, a.y) < std::hypot(b.x, b.y); });
      obj.resize(n - drop);
    }
    for (const auto& p : obj) emit(p, spec.cls, static_cast<InstanceId>(o + 1));
  }
  for (const auto& [bx, by] : blob_centers)
    for (std::size_t k = 0; k < config.blob_points; ++k) {
      const auto e = ellipsoid_point(rng, config.blob_radius, config.blob_radius);
      emit({bx + e.x, by + e.y, config.blob_z_center + e.z, {}}, config.blob_class, 0);
    }

  auto ground = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(config.ground_points_min),
                                                          static_cast<std::int64_t>(config.ground_points_max)));
  if (config.max_points > 0) {
    if (pts.size() > config.max_points)
      fail("synth: objects alone exceed max_points (scene " + std::to_string(index) + ")");
    ground = std::min(ground, config.max_points - pts.size());
  }
  for (std::size_t k = 0; k < ground; ++k) {
    const double r = radius * std::sqrt(rng.uniform());
    const double a = rng.uniform(0, 2 * std::numbers::pi);
    emit({r * std::cos(a), r * std::sin(a), clamped_noise(rng, config.noise_sigma).z, {}}, config.ground_class, 0);
  }

  // interleave so point order carries no label information
  for (std::size_t i = pts.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(pts[i - 1], pts[j]);
    std::swap(sem[i - 1], sem[j]);
    std::swap(inst[i - 1], inst[j]);
  }
  return Scene(std::move(pts), std::move(sem), std::move(inst), taxonomy);
}

PanopticLabel ground_truth_label(const Scene& scene, const ClassTaxonomy& taxonomy) {
  return PanopticLabel(scene.sem_gt(), scene.inst_gt(), taxonomy);
}

PanopticLabel make_fragmented(const Scene& scene, std::size_t parts, const ClassTaxonomy& taxonomy) {
  if (parts < 1) fail("make_fragmented: parts must be at least 1");
  if (parts == 1) return ground_truth_label(scene, taxonomy);

  std::map<InstanceId, std::vector<std::size_t>> members;
  for (std::size_t p = 0; p < scene.size(); ++p)
    if (scene.inst_gt()[p] > 0) members[scene.inst_gt()[p]].push_back(p);

  std::vector<InstanceId> inst(scene.size(), 0);
  InstanceId next = 0;
  const auto& pts = scene.points();
  for (auto& [id, idx] : members) {
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (auto p : idx) {
      const double v[3] = {pts[p].x, pts[p].y, pts[p].z};
      for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], v[a]), hi[a] = std::max(hi[a], v[a]);
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    auto coord = [&](std::size_t p) { return axis == 0 ? pts[p].x : axis == 1 ? pts[p].y : pts[p].z; };
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return coord(a) < coord(b); });
    const std::size_t k = std::min(parts, idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) inst[idx[r]] = next + 1 + static_cast<InstanceId>(r * k / idx.size());
    next += static_cast<InstanceId>(k);
  }
  return PanopticLabel(scene.sem_gt(), std::move(inst), taxonomy);
}

PanopticLabel make_merged(const Scene& scene, const ClassTaxonomy& taxonomy) {
  std::map<ClassId, std::vector<InstanceId>> by_class;
  for (auto id : scene.instance_ids()) {
    for (std::size_t p = 0; p < scene.size(); ++p)
      if (scene.inst_gt()[p] == id) {
        by_class[scene.sem_gt()[p]].push_back(id);
        break;
      }
  }
  std::map<InstanceId, InstanceId> remap;
  for (const auto& [cls, ids] : by_class)
    for (std::size_t k = 1; k < ids.size(); k += 2) remap[ids[k]] = ids[k - 1];
  std::vector<InstanceId> inst = scene.inst_gt();
  for (auto& id : inst)
    if (auto it = remap.find(id); it != remap.end()) id = it->second;
  return PanopticLabel(scene.sem_gt(), std::move(inst), taxonomy);
}

}  // namespace panclust::synth
