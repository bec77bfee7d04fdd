// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace panclust {

namespace {

std::string where(const YAML::Node& n, const std::string& key) {
  const auto m = n.Mark();
  return key + (m.line >= 0 ? " (line " + std::to_string(m.line + 1) + ")" : "");
}

void check_keys(const YAML::Node& n, const std::string& section, const std::set<std::string>& allowed) {
  if (!n.IsMap()) fail("config: " + where(n, section) + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) fail("config: unknown key '" + key + "' in " + where(kv.first, section));
  }
}

template <typename T>
void read(const YAML::Node& n, const char* key, T& out, const std::string& section) {
  if (!n[key]) return;
  try {
    out = n[key].as<T>();
  } catch (const YAML::Exception&) {
    fail("config: bad value for " + section + "." + where(n[key], key));
  }
}

template <typename T>
void read_range(const YAML::Node& n, const char* key, T& lo, T& hi, const std::string& section) {
  if (!n[key]) return;
  const auto v = n[key];
  if (!v.IsSequence() || v.size() != 2) fail("config: " + section + "." + where(v, key) + " must be [min, max]");
  try {
    lo = v[0].as<T>();
    hi = v[1].as<T>();
  } catch (const YAML::Exception&) {
    fail("config: bad value for " + section + "." + where(v, key));
  }
}

ClassTaxonomy parse_taxonomy(const YAML::Node& n) {
  if (n.IsScalar()) {
    if (n.as<std::string>() == "micro") return ClassTaxonomy::micro();
    fail("config: unknown built-in taxonomy '" + n.as<std::string>() + "'");
  }
  check_keys(n, "taxonomy", {"ignore", "classes", "rider_rules"});
  ClassTaxonomy::Spec spec;
  read(n, "ignore", spec.ignore_id, "taxonomy");
  if (!n["classes"] || !n["classes"].IsSequence()) fail("config: taxonomy.classes must be a list");
  for (const auto& c : n["classes"]) {
    check_keys(c, "taxonomy.classes", {"id", "name", "kind", "max_extent", "merge_eps"});
    ClassId id = -1;
    std::string name, kind;
    read(c, "id", id, "taxonomy.classes");
    read(c, "name", name, "taxonomy.classes");
    read(c, "kind", kind, "taxonomy.classes");
    if (!spec.class_names.emplace(id, name).second) fail("config: duplicate class id " + std::to_string(id));
    if (kind == "thing") {
      spec.thing_ids.push_back(id);
      double extent = 0.0, eps = 0.0;
      read(c, "max_extent", extent, "taxonomy.classes");
      read(c, "merge_eps", eps, "taxonomy.classes");
      spec.max_extent[id] = extent;
      spec.merge_eps[id] = eps;
    } else if (kind == "stuff") {
      spec.stuff_ids.push_back(id);
    } else if (kind != "ignore") {
      fail("config: class kind must be thing, stuff or ignore, got '" + kind + "'");
    }
  }
  if (n["rider_rules"])
    for (const auto& r : n["rider_rules"]) {
      check_keys(r, "taxonomy.rider_rules", {"rider", "required", "fallback_vehicle", "fallback_rider", "radius"});
      RiderRule rule;
      read(r, "rider", rule.rider, "rider_rules");
      read(r, "required", rule.required, "rider_rules");
      read(r, "fallback_vehicle", rule.fallback_vehicle, "rider_rules");
      read(r, "fallback_rider", rule.fallback_rider, "rider_rules");
      read(r, "radius", rule.radius, "rider_rules");
      spec.rider_rules.push_back(rule);
    }
  return ClassTaxonomy(std::move(spec));
}

void parse_loss(const YAML::Node& n, LossWeights& w) {
  check_keys(n, "loss", {"w_sem", "w_imp", "w_frag", "small_instance_threshold", "small_instance_factor",
                         "class_weights"});
  read(n, "w_sem", w.w_sem, "loss");
  read(n, "w_imp", w.w_imp, "loss");
  read(n, "w_frag", w.w_frag, "loss");
  read(n, "small_instance_threshold", w.small_instance_threshold, "loss");
  read(n, "small_instance_factor", w.small_instance_factor, "loss");
  read(n, "class_weights", w.class_weights, "loss");
}

synth::Placement parse_placement(const std::string& s) {
  if (s == "uniform") return synth::Placement::Uniform;
  if (s == "slots") return synth::Placement::Slots;
  fail("config: placement must be uniform or slots, got '" + s + "'");
}

void parse_synth(const YAML::Node& n, synth::SynthConfig& c) {
  check_keys(n, "synth", {"seed", "objects", "things", "ground_class", "ground_points", "blob_class", "blobs",
                          "blob_points", "blob_radius", "blob_z_center", "scene_radius", "noise_sigma", "occlusion",
                          "max_points", "placement", "slots", "max_retries"});
  read(n, "seed", c.seed, "synth");
  read_range(n, "objects", c.objects_min, c.objects_max, "synth");
  read(n, "ground_class", c.ground_class, "synth");
  read_range(n, "ground_points", c.ground_points_min, c.ground_points_max, "synth");
  read(n, "blob_class", c.blob_class, "synth");
  read_range(n, "blobs", c.blobs_min, c.blobs_max, "synth");
  read(n, "blob_points", c.blob_points, "synth");
  read(n, "blob_radius", c.blob_radius, "synth");
  read(n, "blob_z_center", c.blob_z_center, "synth");
  read(n, "scene_radius", c.scene_radius, "synth");
  read(n, "noise_sigma", c.noise_sigma, "synth");
  read(n, "occlusion", c.occlusion, "synth");
  read(n, "max_points", c.max_points, "synth");
  read(n, "max_retries", c.max_retries, "synth");
  if (n["placement"]) c.placement = parse_placement(n["placement"].as<std::string>());
  if (const auto s = n["slots"]) {
    check_keys(s, "synth.slots", {"rows", "cols", "spacing", "jitter"});
    read(s, "rows", c.slot_rows, "synth.slots");
    read(s, "cols", c.slot_cols, "synth.slots");
    read(s, "spacing", c.slot_spacing, "synth.slots");
    read(s, "jitter", c.slot_jitter, "synth.slots");
  }
  if (const auto t = n["things"]) {
    if (!t.IsSequence()) fail("config: synth.things must be a list");
    c.things.clear();
    for (const auto& e : t) {
      check_keys(e, "synth.things", {"class", "radius", "height", "z_center", "points", "min_separation", "weight"});
      synth::ThingSpec spec;
      read(e, "class", spec.cls, "synth.things");
      read(e, "radius", spec.radius, "synth.things");
      read(e, "height", spec.height, "synth.things");
      read(e, "z_center", spec.z_center, "synth.things");
      read_range(e, "points", spec.points_min, spec.points_max, "synth.things");
      read(e, "min_separation", spec.min_separation, "synth.things");
      read(e, "weight", spec.weight, "synth.things");
      c.things.push_back(spec);
    }
  }
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "momentum") return Optimizer::Momentum;
  if (s == "adam") return Optimizer::Adam;
  fail("config: optimizer must be sgd, momentum or adam, got '" + s + "'");
}

const char* optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::Sgd: return "sgd";
    case Optimizer::Momentum: return "momentum";
    case Optimizer::Adam: return "adam";
  }
  return "?";
}

void parse_train(const YAML::Node& n, TrainConfig& c) {
  check_keys(n, "train", {"seed", "learning_rate", "iterations", "batch_size", "optimizer", "momentum", "adam_beta2",
                          "adam_eps", "grad_clip", "num_clusters", "hidden", "neighbors", "coord_scale",
                          "frag_delay", "class_weight_scenes"});
  read(n, "seed", c.seed, "train");
  read(n, "learning_rate", c.learning_rate, "train");
  read(n, "iterations", c.iterations, "train");
  read(n, "batch_size", c.batch_size, "train");
  if (n["optimizer"]) c.optimizer = parse_optimizer(n["optimizer"].as<std::string>());
  read(n, "momentum", c.momentum, "train");
  read(n, "adam_beta2", c.adam_beta2, "train");
  read(n, "adam_eps", c.adam_eps, "train");
  read(n, "grad_clip", c.grad_clip, "train");
  read(n, "num_clusters", c.num_clusters, "train");
  read(n, "hidden", c.hidden, "train");
  read(n, "neighbors", c.features.neighbors, "train");
  read(n, "coord_scale", c.features.coord_scale, "train");
  read(n, "frag_delay", c.frag_delay, "train");
  read(n, "class_weight_scenes", c.class_weight_scenes, "train");
}

void parse_label_map(const YAML::Node& n, io::LabelMap& m) {
  check_keys(n, "label_map", {"fallback", "table"});
  read(n, "fallback", m.fallback, "label_map");
  if (const auto t = n["table"]) {
    if (!t.IsMap()) fail("config: label_map.table must map raw ids to classes");
    for (const auto& kv : t) m.table[kv.first.as<std::uint32_t>()] = kv.second.as<ClassId>();
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  synth.validate(taxonomy);
  train.validate();
  if (!train.weights.class_weights.empty() && train.weights.class_weights.size() != taxonomy.num_classes())
    fail("config: loss.class_weights needs one entry per class");
  if (!label_map.empty() && !taxonomy.valid(label_map.fallback)) fail("config: label_map.fallback outside taxonomy");
  for (const auto& [raw, cls] : label_map.table)
    if (!taxonomy.valid(cls)) fail("config: label_map sends " + std::to_string(raw) + " outside taxonomy");
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "config", {"taxonomy", "loss", "synth", "train", "label_map", "eval_offset"});
  try {
    if (root["taxonomy"]) c.taxonomy = parse_taxonomy(root["taxonomy"]);
    if (root["loss"]) parse_loss(root["loss"], c.train.weights);
    if (root["synth"]) parse_synth(root["synth"], c.synth);
    if (root["train"]) parse_train(root["train"], c.train);
    if (root["label_map"]) parse_label_map(root["label_map"], c.label_map);
    read(root, "eval_offset", c.eval_offset, "config");
  } catch (const YAML::Exception& e) {
    fail(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  const auto& spec = c.taxonomy.spec();
  out << YAML::Key << "taxonomy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "ignore" << YAML::Value << spec.ignore_id;
  out << YAML::Key << "classes" << YAML::Value << YAML::BeginSeq;
  for (const auto& [id, name] : spec.class_names) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << id << YAML::Key << "name"
        << YAML::Value << name;
    if (c.taxonomy.is_thing(id)) {
      out << YAML::Key << "kind" << YAML::Value << "thing";
      out << YAML::Key << "max_extent" << YAML::Value << c.taxonomy.max_extent(id);
      out << YAML::Key << "merge_eps" << YAML::Value << c.taxonomy.merge_eps(id);
    } else {
      out << YAML::Key << "kind" << YAML::Value << (c.taxonomy.is_stuff(id) ? "stuff" : "ignore");
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "rider_rules" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : spec.rider_rules)
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "rider" << YAML::Value << r.rider << YAML::Key << "required"
        << YAML::Value << r.required << YAML::Key << "fallback_vehicle" << YAML::Value << r.fallback_vehicle
        << YAML::Key << "fallback_rider" << YAML::Value << r.fallback_rider << YAML::Key << "radius" << YAML::Value
        << r.radius << YAML::EndMap;
  out << YAML::EndSeq << YAML::EndMap;

  const auto& w = c.train.weights;
  out << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "w_sem" << YAML::Value << w.w_sem;
  out << YAML::Key << "w_imp" << YAML::Value << w.w_imp;
  out << YAML::Key << "w_frag" << YAML::Value << w.w_frag;
  out << YAML::Key << "small_instance_threshold" << YAML::Value << w.small_instance_threshold;
  out << YAML::Key << "small_instance_factor" << YAML::Value << w.small_instance_factor;
  if (!w.class_weights.empty())
    out << YAML::Key << "class_weights" << YAML::Value << YAML::Flow << w.class_weights;
  out << YAML::EndMap;

  const auto& s = c.synth;
  auto range = [&out](const char* key, auto lo, auto hi) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << lo << hi << YAML::EndSeq;
  };
  out << YAML::Key << "synth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  range("objects", s.objects_min, s.objects_max);
  out << YAML::Key << "things" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : s.things) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "class" << YAML::Value << t.cls << YAML::Key << "radius"
        << YAML::Value << t.radius << YAML::Key << "height" << YAML::Value << t.height << YAML::Key << "z_center"
        << YAML::Value << t.z_center;
    range("points", t.points_min, t.points_max);
    out << YAML::Key << "min_separation" << YAML::Value << t.min_separation << YAML::Key << "weight" << YAML::Value
        << t.weight << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "ground_class" << YAML::Value << s.ground_class;
  range("ground_points", s.ground_points_min, s.ground_points_max);
  out << YAML::Key << "blob_class" << YAML::Value << s.blob_class;
  range("blobs", s.blobs_min, s.blobs_max);
  out << YAML::Key << "blob_points" << YAML::Value << s.blob_points;
  out << YAML::Key << "blob_radius" << YAML::Value << s.blob_radius;
  out << YAML::Key << "blob_z_center" << YAML::Value << s.blob_z_center;
  out << YAML::Key << "scene_radius" << YAML::Value << s.scene_radius;
  out << YAML::Key << "noise_sigma" << YAML::Value << s.noise_sigma;
  out << YAML::Key << "occlusion" << YAML::Value << s.occlusion;
  out << YAML::Key << "max_points" << YAML::Value << s.max_points;
  out << YAML::Key << "placement" << YAML::Value << (s.placement == synth::Placement::Slots ? "slots" : "uniform");
  out << YAML::Key << "slots" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "rows" << YAML::Value
      << s.slot_rows << YAML::Key << "cols" << YAML::Value << s.slot_cols << YAML::Key << "spacing" << YAML::Value
      << s.slot_spacing << YAML::Key << "jitter" << YAML::Value << s.slot_jitter << YAML::EndMap;
  out << YAML::Key << "max_retries" << YAML::Value << s.max_retries;
  out << YAML::EndMap;

  const auto& t = c.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "iterations" << YAML::Value << t.iterations;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "optimizer" << YAML::Value << optimizer_name(t.optimizer);
  out << YAML::Key << "momentum" << YAML::Value << t.momentum;
  out << YAML::Key << "adam_beta2" << YAML::Value << t.adam_beta2;
  out << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps;
  out << YAML::Key << "grad_clip" << YAML::Value << t.grad_clip;
  out << YAML::Key << "num_clusters" << YAML::Value << t.num_clusters;
  out << YAML::Key << "hidden" << YAML::Value << t.hidden;
  out << YAML::Key << "neighbors" << YAML::Value << t.features.neighbors;
  out << YAML::Key << "coord_scale" << YAML::Value << t.features.coord_scale;
  out << YAML::Key << "frag_delay" << YAML::Value << t.frag_delay;
  out << YAML::Key << "class_weight_scenes" << YAML::Value << t.class_weight_scenes;
  out << YAML::EndMap;

  out << YAML::Key << "label_map" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "fallback" << YAML::Value << c.label_map.fallback;
  out << YAML::Key << "table" << YAML::Value << YAML::Flow << c.label_map.table;
  out << YAML::EndMap;

  out << YAML::Key << "eval_offset" << YAML::Value << c.eval_offset;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace panclust
