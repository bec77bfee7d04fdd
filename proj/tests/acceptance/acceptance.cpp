// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "panclust/cli.hpp"
#include "panclust/config.hpp"
#include "panclust/dataio.hpp"
#include "panclust/gradcheck.hpp"
#include "panclust/losses.hpp"
#include "panclust/metrics.hpp"
#include "panclust/postproc.hpp"
#include "panclust/synth.hpp"
#include "panclust/toytrain.hpp"

using namespace panclust;
namespace fs = std::filesystem;

namespace {

// tolerances and budgets
constexpr double kLossTol = 1e-9;
constexpr std::size_t kLossTrials = 1000;
constexpr double kLossBudget = 10.0;

constexpr std::size_t kGradTrials = 100;
constexpr double kGradStep = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudget = 60.0;

constexpr std::size_t kToyEvalScenes = 50;
constexpr double kToyMinRqTh = 0.9;
constexpr double kToyMaxImpFrag = 0.05;
constexpr std::size_t kToyMaxIterations = 5000;
constexpr std::size_t kToyMaxPoints = 500;
constexpr std::size_t kToyClusters = 16;
constexpr double kToyBudget = 600.0;

constexpr std::size_t kPostScenes = 100;
constexpr std::size_t kPostParts = 4;
constexpr double kPostBudget = 60.0;

constexpr std::size_t kMetricScenes = 500;
constexpr std::size_t kMetricSegments = 6;
constexpr double kIdentityTol = 1e-9;
constexpr double kMetricBudget = 60.0;

constexpr std::size_t kDbscanInputs = 1000;
constexpr std::size_t kDbscanMaxPoints = 200;
constexpr double kDbscanBudget = 60.0;

constexpr std::size_t kCodecPayloads = 100;
constexpr double kCodecBudget = 5.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const ClassTaxonomy& micro() { return testing_util::micro(); }

// 1 -------------------------------------------------------------------------------------------

Outcome loss_oracles() {
  Outcome o;
  struct Fixture {
    RowMatrix s;
    double imp, frag;
  };
  const std::vector<Fixture> fixtures = {
      {testing_util::matrix({{1, 0}, {0, 1}}), 0.0, 0.0},
      {testing_util::matrix({{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}}), 0.2, 1.0 / 3},
      {testing_util::matrix({{0.5, 0.5}}), 0.0, 0.5},
  };
  for (const auto& f : fixtures) {
    const auto s = soft_matrix_from_values(f.s);
    if (std::abs(impurity_loss(s).value - f.imp) > kLossTol || std::abs(fragmentation_loss(s).value - f.frag) > kLossTol)
      o.pass = false;
  }
  Rng rng(20240601);
  double worst = 0.0;
  for (std::size_t t = 0; t < kLossTrials; ++t) {
    const auto g = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto values = testing_util::random_distributions(rng, g, n, rng.uniform(0.5, 4.0));
    const auto grid = testing_util::to_grid(values);
    const auto s = soft_matrix_from_values(values);
    worst = std::max({worst, std::abs(impurity_loss(s).value - oracle::impurity(grid)),
                      std::abs(fragmentation_loss(s).value - oracle::fragmentation(grid))});
  }
  o.pass = o.pass && worst <= kLossTol;
  o.detail = "fixtures 3, random " + std::to_string(kLossTrials) + ", max |diff| " + fmt("%.3g", worst);
  return o;
}

// 2 -------------------------------------------------------------------------------------------

Outcome gradient_checks() {
  Outcome o;
  for (auto kind : {LossKind::Impurity, LossKind::Fragmentation, LossKind::CrossEntropy, LossKind::Lovasz,
                    LossKind::Total}) {
    const auto s = run_gradcheck(kind, kGradTrials, kGradStep, kGradTol, 7);
    o.pass = o.pass && s.failures == 0;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + loss_kind_name(kind) + " " +
                std::to_string(s.trials - s.failures) + "/" + std::to_string(s.trials) + " worst " +
                fmt("%.2g", s.worst_rel_error) + " excl " +
                fmt("%.1f%%", 100.0 * static_cast<double>(s.excluded) /
                                  static_cast<double>(std::max<std::size_t>(1, s.checked + s.excluded)));
  }
  return o;
}

// 3 -------------------------------------------------------------------------------------------

Outcome toy_clustering(const fs::path& config_path) {
  Outcome o;
  const auto cfg = load_config(config_path);
  const auto& tax = cfg.taxonomy;
  if (cfg.train.iterations > kToyMaxIterations || cfg.train.num_clusters != kToyClusters ||
      cfg.synth.max_points == 0 || cfg.synth.max_points > kToyMaxPoints || cfg.synth.objects_min < 2 ||
      cfg.synth.objects_max > 5) {
    o.pass = false;
    o.detail = "config outside the criterion's envelope";
    return o;
  }
  const SceneStream stream = [&](std::size_t i) { return synth::generate(cfg.synth, i, tax); };
  const auto result = train(cfg.train, stream, tax);

  PanopticEvaluator ev(tax);
  double imp = 0.0, frag = 0.0;
  for (std::size_t i = 0; i < kToyEvalScenes; ++i) {
    const auto scene = synth::generate(cfg.synth, cfg.eval_offset + i, tax);
    ev.add(infer(result.model, scene, tax), scene);
    // impurity and fragmentation of the hard cluster assignment
    const auto hard = hard_labels(forward(result.model, scene.points()));
    RowMatrix one_hot = RowMatrix::Zero(static_cast<Eigen::Index>(scene.size()),
                                        static_cast<Eigen::Index>(result.model.num_clusters()));
    for (std::size_t p = 0; p < scene.size(); ++p) one_hot(static_cast<Eigen::Index>(p), hard.cluster[p]) = 1.0;
    const auto s = build_soft_matrix(scene.inst_gt(), one_hot);
    imp += impurity_loss(s).value;
    frag += fragmentation_loss(s).value;
  }
  imp /= kToyEvalScenes;
  frag /= kToyEvalScenes;
  const auto r = ev.report();
  o.pass = r.rq_th >= kToyMinRqTh && imp + frag < kToyMaxImpFrag;
  o.detail = "RQ_th " + fmt("%.4f", r.rq_th) + " (>= 0.9), impurity+fragmentation " + fmt("%.4f", imp + frag) +
             " (< 0.05), PQ " + fmt("%.4f", r.pq) + ", " + std::to_string(cfg.train.iterations) + " iterations";
  return o;
}

// 4 -------------------------------------------------------------------------------------------

Outcome postprocessing() {
  Outcome o;
  auto sc = synth::SynthConfig::micro_defaults();
  sc.seed = 404;
  const auto& tax = micro();
  PanopticEvaluator frag_before(tax), frag_after(tax), merged_before(tax), merged_after(tax), all_before(tax),
      all_after(tax);
  for (std::size_t i = 0; i < kPostScenes; ++i) {
    const auto scene = synth::generate(sc, i, tax);
    const auto& pts = scene.points();
    const auto fragmented = synth::make_fragmented(scene, kPostParts, tax);
    const auto merged = synth::make_merged(scene, tax);
    frag_before.add(fragmented, scene);
    frag_after.add(post_merger(fragmented, pts, tax), scene);
    merged_before.add(merged, scene);
    merged_after.add(post_splitter(merged, pts, tax), scene);
    for (const auto* label : {&fragmented, &merged}) {
      all_before.add(*label, scene);
      all_after.add(post_all(*label, pts, tax), scene);
    }
  }
  const auto fb = frag_before.report(), fa = frag_after.report();
  const auto mb = merged_before.report(), ma = merged_after.report();
  const auto ab = all_before.report(), aa = all_after.report();
  o.pass = fa.pq > fb.pq && ma.pq > mb.pq && aa.miou >= ab.miou;
  o.detail = "merger PQ " + fmt("%.4f", fb.pq) + " -> " + fmt("%.4f", fa.pq) + ", splitter PQ " + fmt("%.4f", mb.pq) +
             " -> " + fmt("%.4f", ma.pq) + ", post_all mIoU " + fmt("%.4f", ab.miou) + " -> " + fmt("%.4f", aa.miou);
  return o;
}

// 5 -------------------------------------------------------------------------------------------

Outcome metrics_oracle() {
  Outcome o;
  const auto& tax = micro();
  const auto kind = testing_util::class_kinds(tax);
  Rng rng(5005);
  std::size_t mismatches = 0;
  double worst_identity = 0.0;
  for (std::size_t t = 0; t < kMetricScenes; ++t) {
    const auto c = testing_util::random_panoptic_case(rng, static_cast<std::size_t>(rng.uniform_int(1, 80)),
                                                       kMetricSegments, rng.uniform(0.3, 0.95));
    PanopticEvaluator ev(tax);
    ev.add(c.pred_sem, c.pred_inst, c.gt_sem, c.gt_inst);
    const auto r = ev.report();
    const auto want = oracle::exhaustive_match(c.pred_sem, c.pred_inst, c.gt_sem, c.gt_inst, kind);
    for (std::size_t cls = 1; cls < tax.num_classes(); ++cls) {
      const auto it = want.find(static_cast<int>(cls));
      const oracle::ClassCounts w = it == want.end() ? oracle::ClassCounts{} : it->second;
      const auto& got = r.per_class[cls];
      const double sq = w.tp ? w.iou_sum / static_cast<double>(w.tp) : 0.0;
      if (got.tp != w.tp || got.fp != w.fp || got.fn != w.fn || std::abs(got.sq - sq) > 1e-12) ++mismatches;
      worst_identity = std::max(worst_identity, std::abs(got.pq - got.sq * got.rq));
    }
  }
  // one class with 1 TP at IoU 0.8, 1 FP and 1 FN
  std::vector<ClassId> gs(12, 3), ps(12, 3);
  std::vector<InstanceId> gi(12, 1), pi(12, 1);
  gi[10] = gi[11] = 2;
  pi[8] = pi[9] = 7;
  ps[10] = ps[11] = 0;
  pi[10] = pi[11] = 0;
  PanopticEvaluator ev(tax);
  ev.add(ps, pi, gs, gi);
  const auto car = ev.report().per_class[3];
  const bool fixture = std::abs(car.pq - 0.4) < 1e-12 && std::abs(car.sq - 0.8) < 1e-12 && std::abs(car.rq - 0.5) < 1e-12;
  o.pass = mismatches == 0 && worst_identity <= kIdentityTol && fixture;
  o.detail = std::to_string(kMetricScenes) + " scenes, " + std::to_string(mismatches) + " class mismatches, max |PQ-SQ*RQ| " +
             fmt("%.2g", worst_identity) + ", PQ=0.4 fixture " + (fixture ? "ok" : "wrong");
  return o;
}

// 6 -------------------------------------------------------------------------------------------

Outcome dbscan_oracle() {
  Outcome o;
  Rng rng(6006);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < kDbscanInputs; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, kDbscanMaxPoints));
    const double extent = rng.uniform(1.0, 10.0);
    std::vector<Point3> pts(n);
    std::vector<oracle::Pt> plain(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = {rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, 1), {}};
      // snap some points to a coarse grid so exact-eps distances occur
      if (rng.uniform() < 0.2) pts[i] = {std::round(pts[i].x), std::round(pts[i].y), 0.0, {}};
      plain[i] = {pts[i].x, pts[i].y, pts[i].z};
    }
    const double eps = rng.uniform() < 0.2 ? 1.0 : rng.uniform(0.2, 1.5);
    const auto min_pts = static_cast<std::size_t>(rng.uniform_int(1, 6));
    if (dbscan(pts, {eps, min_pts}) != oracle::dbscan(plain, eps, min_pts)) ++mismatches;
  }
  o.pass = mismatches == 0;
  o.detail = std::to_string(kDbscanInputs) + " inputs, " + std::to_string(mismatches) + " mismatches";
  return o;
}

// 7 -------------------------------------------------------------------------------------------

Outcome codecs(const fs::path& dir) {
  Outcome o;
  fs::create_directories(dir);
  Rng rng(7007);
  std::size_t failures = 0;
  for (std::size_t t = 0; t < kCodecPayloads; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 300));
    std::vector<Point3> pts(n);
    io::RawLabels raw;
    std::vector<ClassId> sem(n);
    std::vector<InstanceId> inst(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = {static_cast<float>(rng.normal(0, 40)), static_cast<float>(rng.normal(0, 40)),
                static_cast<float>(rng.normal(0, 2)), static_cast<float>(rng.uniform())};
      raw.sem.push_back(static_cast<std::uint32_t>(rng.uniform_int(0, 0xFFFF)));
      raw.inst.push_back(static_cast<std::uint32_t>(rng.uniform_int(0, 0xFFFF)));
      sem[i] = static_cast<ClassId>(rng.uniform_int(0, 8));
      inst[i] = micro().is_thing(sem[i]) ? static_cast<InstanceId>(sem[i]) * 1000 + static_cast<InstanceId>(rng.uniform_int(0, 900)) : 0;
    }
    io::write_velodyne_bin(dir / "p.bin", pts);
    const auto back = io::read_velodyne_bin(dir / "p.bin");
    bool ok = back.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i)
      ok = back[i].x == pts[i].x && back[i].y == pts[i].y && back[i].z == pts[i].z && back[i].remission == pts[i].remission;

    io::write_labels(dir / "l.label", raw);
    const auto raw_back = io::read_labels(dir / "l.label", n);
    ok = ok && raw_back.sem == raw.sem && raw_back.inst == raw.inst;

    const PanopticLabel label(sem, inst, micro());
    io::write_panoptic(dir / "q.label", label);
    ok = ok && io::read_panoptic(dir / "q.label", micro(), n) == label;
    failures += !ok;
  }
  std::vector<std::uint8_t> word = {0x09, 0x00, 0x01, 0x00};
  io::write_bytes(dir / "f.label", word);
  const auto f = io::read_labels(dir / "f.label");
  const bool fixture = f.sem == std::vector<std::uint32_t>{9} && f.inst == std::vector<std::uint32_t>{1} &&
                       io::pack_label(9, 1) == 0x00010009u;
  o.pass = failures == 0 && fixture;
  o.detail = std::to_string(kCodecPayloads) + " payloads, " + std::to_string(failures) + " failures, 0x00010009 fixture " +
             (fixture ? "ok" : "wrong");
  return o;
}

// 8 -------------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Every regular file under `root` keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

Outcome determinism(const fs::path& dir) {
  Outcome o;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto config = (dir / "small.yaml").string();
  std::ofstream(config) << "synth:\n  seed: 8\n  max_points: 300\n"
                           "train:\n  seed: 3\n  iterations: 20\n  batch_size: 3\n  hidden: 12\n"
                           "  num_clusters: 8\n  class_weight_scenes: 8\n";
  auto run = [](std::vector<std::string> args, std::string& out) {
    args.insert(args.begin(), "panclust");
    std::ostringstream os, es;
    const int code = run_cli(args, os, es);
    out += os.str();
    if (code != kExitOk) out += "exit " + std::to_string(code) + ": " + es.str();
    return code == kExitOk;
  };
  std::string unused;
  if (!run({"generate", "-c", config, "-o", (dir / "scenes").string(), "-n", "6", "--start", "100000"}, unused)) {
    o.pass = false;
    o.detail = "generate failed: " + unused;
    return o;
  }
  auto pipeline = [&](const std::string& tag, const std::string& jobs) {
    const auto out = dir / tag;
    fs::create_directories(out);
    std::string log;
    const bool ok =
        run({"train", "-c", config, "-j", jobs, "-o", (out / "model.ckpt").string(), "--curve",
             (out / "curve.csv").string()},
            log) &&
        run({"infer", "-c", config, "-j", jobs, "-m", (out / "model.ckpt").string(), "-s", (dir / "scenes").string(),
             "-o", (out / "pred").string(), "--post-all"},
            log) &&
        run({"evaluate", "-c", config, "-j", jobs, "-p", (out / "pred").string(), "-g", (dir / "scenes").string(), "-r",
             (out / "report.json").string()},
            log);
    std::ofstream(out / "stdout.txt") << log;
    return ok ? snapshot(out) : std::map<std::string, std::string>{{"error", log}};
  };
  const auto a = pipeline("run_a", "1");
  const auto b = pipeline("run_b", "1");
  const auto c = pipeline("run_c", "4");
  o.pass = !a.contains("error") && a == b && a == c;
  o.detail = std::to_string(a.size()) + " files compared across 3 runs (jobs 1, 1, 4): " +
             (a == b ? "repeat identical" : "repeat differs") + ", " + (a == c ? "jobs identical" : "jobs differ");
  if (a.contains("error")) o.detail += "; " + a.at("error");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panclust acceptance checks"};
  fs::path workdir = fs::temp_directory_path() / "panclust_acceptance";
  fs::path config = fs::path(PANCLUST_SOURCE_DIR) / "configs" / "toy.yaml";
  std::set<int> only;
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--toy-config", config, "config for the toy clustering run");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "loss oracles", kLossBudget, loss_oracles},
      {2, "gradient checks", kGradBudget, gradient_checks},
      {3, "toy end-to-end clustering", kToyBudget, [&] { return toy_clustering(config); }},
      {4, "post-processing directionality", kPostBudget, postprocessing},
      {5, "metrics oracle", kMetricBudget, metrics_oracle},
      {6, "dbscan equivalence", kDbscanBudget, dbscan_oracle},
      {7, "codec round-trips", kCodecBudget, [&] { return codecs(workdir / "codecs"); }},
      {8, "determinism", 0.0, [&] { return determinism(workdir / "determinism"); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = c.budget <= 0.0 || secs < c.budget;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << o.detail << "; "
              << fmt("%.1f s", secs);
    if (c.budget > 0.0) std::cout << " of " << fmt("%.0f s", c.budget) << (in_time ? "" : ", over budget");
    std::cout << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
