// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace panclust::io {

namespace {

constexpr char kSceneMagic[8] = {'P', 'C', 'S', 'C', 'E', 'N', 'E', '\0'};
constexpr std::uint32_t kSceneVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail_io(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
              " more bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
  }
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail_io("read error on " + path.string());
  return bytes;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_io("write error on " + path.string());
}

std::vector<Point3> read_velodyne_bin(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 16 != 0)
    fail_io(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 16, truncated record at byte offset " +
            std::to_string(bytes.size() - bytes.size() % 16));
  Reader r(bytes, path.string());
  std::vector<Point3> pts(bytes.size() / 16);
  for (auto& p : pts) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    p.remission = r.f32();
  }
  return pts;
}

void write_velodyne_bin(const fs::path& path, const std::vector<Point3>& points) {
  Writer w;
  for (const auto& p : points) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
    w.f32(static_cast<float>(p.z));
    w.f32(static_cast<float>(p.remission.value_or(0.0)));
  }
  write_bytes(path, w.bytes());
}

std::uint32_t pack_label(std::uint32_t sem, std::uint32_t inst) {
  if (sem > 0xFFFF) fail("label: semantic id " + std::to_string(sem) + " does not fit in 16 bits");
  if (inst > 0xFFFF) fail("label: instance id " + std::to_string(inst) + " does not fit in 16 bits");
  return (inst << 16) | sem;
}

RawLabels unpack_labels(std::span<const std::uint32_t> words) {
  RawLabels out;
  out.sem.reserve(words.size());
  out.inst.reserve(words.size());
  for (auto w : words) {
    out.sem.push_back(w & 0xFFFFu);
    out.inst.push_back(w >> 16);
  }
  return out;
}

RawLabels read_labels(const fs::path& path, std::optional<std::size_t> expected_points) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 4 != 0)
    fail_io(path.string() + ": truncated label word at byte offset " + std::to_string(bytes.size() - bytes.size() % 4));
  const auto n = bytes.size() / 4;
  if (expected_points && *expected_points != n)
    fail_io(path.string() + ": " + std::to_string(n) + " labels for " + std::to_string(*expected_points) + " points");
  Reader r(bytes, path.string());
  std::vector<std::uint32_t> words(n);
  for (auto& w : words) w = r.u32();
  return unpack_labels(words);
}

void write_labels(const fs::path& path, const RawLabels& labels) {
  if (labels.sem.size() != labels.inst.size()) fail("labels: semantic and instance lengths differ");
  Writer w;
  for (std::size_t i = 0; i < labels.sem.size(); ++i) w.u32(pack_label(labels.sem[i], labels.inst[i]));
  write_bytes(path, w.bytes());
}

void write_panoptic(const fs::path& path, const PanopticLabel& label) {
  RawLabels raw;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label.sem()[i] < 0) fail("panoptic: negative class id");
    raw.sem.push_back(static_cast<std::uint32_t>(label.sem()[i]));
    raw.inst.push_back(label.inst()[i]);
  }
  write_labels(path, raw);
}

PanopticLabel read_panoptic(const fs::path& path, const ClassTaxonomy& taxonomy,
                            std::optional<std::size_t> expected_points) {
  auto raw = read_labels(path, expected_points);
  std::vector<ClassId> sem(raw.sem.begin(), raw.sem.end());
  return PanopticLabel(std::move(sem), std::move(raw.inst), taxonomy);
}

ClassId LabelMap::operator()(std::uint32_t raw) const {
  if (table.empty()) return static_cast<ClassId>(raw);
  auto it = table.find(raw);
  return it == table.end() ? fallback : it->second;
}

Scene load_kitti_scene(const fs::path& bin, const fs::path& label, const ClassTaxonomy& taxonomy, const LabelMap& map) {
  auto points = read_velodyne_bin(bin);
  auto raw = read_labels(label, points.size());
  std::vector<ClassId> sem(points.size());
  std::vector<InstanceId> inst(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sem[i] = map(raw.sem[i]);
    if (!taxonomy.valid(sem[i])) fail(label.string() + ": class id " + std::to_string(sem[i]) + " outside taxonomy");
    if (taxonomy.is_thing(sem[i])) inst[i] = raw.inst[i];
  }
  return Scene(std::move(points), std::move(sem), std::move(inst), taxonomy);
}

void save_kitti_scene(const fs::path& bin, const fs::path& label, const Scene& scene) {
  write_velodyne_bin(bin, scene.points());
  RawLabels raw;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    raw.sem.push_back(static_cast<std::uint32_t>(scene.sem_gt()[i]));
    raw.inst.push_back(scene.inst_gt()[i]);
  }
  write_labels(label, raw);
}

void write_scene(const fs::path& path, const Scene& scene) {
  Writer w;
  w.raw(kSceneMagic, sizeof kSceneMagic);
  w.u32(kSceneVersion);
  w.u32(0);  // reserved
  w.u64(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& p = scene.points()[i];
    w.f64(p.x);
    w.f64(p.y);
    w.f64(p.z);
    w.u32(p.remission ? 1u : 0u);
    w.f64(p.remission.value_or(0.0));
    w.i32(scene.sem_gt()[i]);
    w.u32(scene.inst_gt()[i]);
  }
  write_bytes(path, w.bytes());
}

Scene read_scene(const fs::path& path, const ClassTaxonomy& taxonomy) {
  const auto bytes = read_bytes(path);
  Reader r(bytes, path.string());
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kSceneMagic, sizeof magic) != 0) fail_io(path.string() + ": not a scene container");
  const auto version = r.u32();
  if (version != kSceneVersion) fail_io(path.string() + ": unsupported scene version " + std::to_string(version));
  r.u32();
  const auto n = r.u64();
  constexpr std::size_t kRecord = 8 * 3 + 4 + 8 + 4 + 4;
  if (n > r.remaining() / kRecord) fail_io(path.string() + ": point count exceeds file size");
  std::vector<Point3> pts(n);
  std::vector<ClassId> sem(n);
  std::vector<InstanceId> inst(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].x = r.f64();
    pts[i].y = r.f64();
    pts[i].z = r.f64();
    const bool has_remission = r.u32() != 0;
    const double rem = r.f64();
    if (has_remission) pts[i].remission = rem;
    sem[i] = r.i32();
    inst[i] = r.u32();
  }
  if (r.remaining() != 0) fail_io(path.string() + ": trailing bytes after scene payload");
  return Scene(std::move(pts), std::move(sem), std::move(inst), taxonomy);
}

}  // namespace panclust::io
