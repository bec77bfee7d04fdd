// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "panclust/config.hpp"
#include "panclust/dataio.hpp"
#include "panclust/gradcheck.hpp"
#include "panclust/metrics.hpp"
#include "panclust/postproc.hpp"
#include "panclust/synth.hpp"
#include "panclust/toytrain.hpp"

namespace panclust {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> workers;
  for (std::size_t j = 0; j < jobs; ++j)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  workers.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// A scene on disk: a .pcscene container, or a KITTI .bin with a sibling .label.
struct SceneFile {
  std::string stem;
  fs::path path;
  fs::path label;  // KITTI only
};

std::vector<SceneFile> list_scenes(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail_io("not a directory: " + dir.string());
  std::vector<SceneFile> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto& p = e.path();
    if (p.extension() == ".pcscene") {
      out.push_back({p.stem().string(), p, {}});
    } else if (p.extension() == ".bin") {
      auto label = p;
      label.replace_extension(".label");
      if (!fs::exists(label)) fail_io("missing label file for " + p.string());
      out.push_back({p.stem().string(), p, label});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
  if (out.empty()) fail_io("no scenes in " + dir.string());
  return out;
}

Scene load(const SceneFile& f, const ExperimentConfig& cfg) {
  if (f.label.empty()) return io::read_scene(f.path, cfg.taxonomy);
  return io::load_kitti_scene(f.path, f.label, cfg.taxonomy, cfg.label_map);
}

ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return load_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_io("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct Options {
  std::string config;
  std::size_t jobs = 1;

  // generate
  fs::path out_dir;
  std::size_t count = 0;
  std::optional<std::size_t> start;
  std::string format = "pcscene";

  // train
  fs::path scenes;
  fs::path checkpoint;
  fs::path curve;

  // infer / postprocess
  fs::path pred;
  bool post_splitter = false, post_merger = false, post_cyclists = false, post_all = false;

  // evaluate
  fs::path gt;
  fs::path report;

  // perturb
  std::size_t fragment = 0;
  bool merge = false;

  // gradcheck
  std::string loss;
  std::size_t trials = 100;
  double h = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;

  PostFlags flags() const {
    if (post_all) return PostFlags::all();
    return {post_splitter, post_merger, post_cyclists};
  }
};

int cmd_generate(const Options& o, std::ostream& out) {
  const auto cfg = config_or_default(o.config);
  ensure_dir(o.out_dir);
  const std::size_t start = o.start.value_or(0);
  std::vector<std::string> lines(o.count);
  parallel_for(o.count, o.jobs, [&](std::size_t k) {
    const auto index = start + k;
    const auto scene = synth::generate(cfg.synth, index, cfg.taxonomy);
    char stem[32];
    std::snprintf(stem, sizeof stem, "%06zu", index);
    if (o.format == "kitti")
      io::save_kitti_scene(o.out_dir / (std::string(stem) + ".bin"), o.out_dir / (std::string(stem) + ".label"), scene);
    else
      io::write_scene(o.out_dir / (std::string(stem) + ".pcscene"), scene);
    lines[k] = std::string(stem) + " seed=" + std::to_string(cfg.synth.seed) + " index=" + std::to_string(index) +
               " points=" + std::to_string(scene.size()) + " objects=" + std::to_string(scene.instance_ids().size());
  });
  std::string manifest;
  for (const auto& l : lines) manifest += l + "\n";
  write_text(o.out_dir / "manifest.txt", manifest);
  out << manifest;
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto cfg = config_or_default(o.config);
  SceneStream stream;
  std::vector<Scene> cached;
  if (!o.scenes.empty()) {
    const auto files = list_scenes(o.scenes);
    cached.resize(files.size());
    parallel_for(files.size(), o.jobs, [&](std::size_t i) { cached[i] = load(files[i], cfg); });
    stream = [&cached](std::size_t i) { return cached[i % cached.size()]; };
  } else {
    stream = [&cfg](std::size_t i) { return synth::generate(cfg.synth, i, cfg.taxonomy); };
  }
  TrainResult result;
  try {
    result = train(cfg.train, stream, cfg.taxonomy);
  } catch (const TrainingDiverged& e) {
    err << "training diverged at iteration " << e.iteration() << ": " << e.what() << "\n";
    return kExitValidation;
  }
  save_checkpoint(o.checkpoint, result.model);
  std::string csv = "iteration,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
    csv += std::to_string(i) + "," + fmt("%.17g", result.loss_curve[i]) + "\n";
  if (!o.curve.empty()) write_text(o.curve, csv);
  const double last = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
  out << "iterations " << result.loss_curve.size() << "\nfinal_loss " << fmt("%.6f", last) << "\n";
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const auto cfg = config_or_default(o.config);
  const auto model = load_checkpoint(o.checkpoint);
  if (model.num_classes() != cfg.taxonomy.num_classes()) fail("checkpoint and taxonomy disagree on the class count");
  const auto files = list_scenes(o.scenes);
  ensure_dir(o.out_dir);
  const auto flags = o.flags();
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto scene = load(files[i], cfg);
    auto label = infer(model, scene, cfg.taxonomy);
    if (flags.any()) label = post_process(label, scene.points(), cfg.taxonomy, flags);
    io::write_panoptic(o.out_dir / (files[i].stem + ".label"), label);
  });
  out << "scenes " << files.size() << "\n";
  return kExitOk;
}

int cmd_postprocess(const Options& o, std::ostream& out) {
  const auto cfg = config_or_default(o.config);
  const auto files = list_scenes(o.scenes);
  ensure_dir(o.out_dir);
  const auto flags = o.flags();
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto scene = load(files[i], cfg);
    auto label = io::read_panoptic(o.pred / (files[i].stem + ".label"), cfg.taxonomy, scene.size());
    if (flags.any()) label = post_process(label, scene.points(), cfg.taxonomy, flags);
    io::write_panoptic(o.out_dir / (files[i].stem + ".label"), label);
  });
  out << "scenes " << files.size() << "\n";
  return kExitOk;
}

int cmd_perturb(const Options& o, std::ostream& out) {
  const auto cfg = config_or_default(o.config);
  if ((o.fragment > 0) == o.merge) fail("perturb: give exactly one of --fragment or --merge");
  const auto files = list_scenes(o.scenes);
  ensure_dir(o.out_dir);
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto scene = load(files[i], cfg);
    const auto label = o.merge ? synth::make_merged(scene, cfg.taxonomy)
                               : synth::make_fragmented(scene, o.fragment, cfg.taxonomy);
    io::write_panoptic(o.out_dir / (files[i].stem + ".label"), label);
  });
  out << "scenes " << files.size() << "\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto cfg = config_or_default(o.config);
  const auto files = list_scenes(o.gt);
  std::vector<std::optional<PanopticEvaluator>> partial(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto scene = load(files[i], cfg);
    const auto pred = io::read_panoptic(o.pred / (files[i].stem + ".label"), cfg.taxonomy, scene.size());
    PanopticEvaluator ev(cfg.taxonomy);
    ev.add(pred, scene);
    partial[i] = std::move(ev);
  });
  PanopticEvaluator total(cfg.taxonomy);
  for (const auto& p : partial) total.merge(*p);
  const auto report = total.report();
  out << report_table(report, cfg.taxonomy);
  if (!o.report.empty()) write_text(o.report, report_json(report, cfg.taxonomy));
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto kind = parse_loss_kind(o.loss);
  const auto s = run_gradcheck(kind, o.trials, o.h, o.tolerance, o.seed);
  out << "loss " << loss_kind_name(kind) << "\ntrials " << s.trials << "\nfailures " << s.failures
      << "\nchecked " << s.checked << "\nexcluded " << s.excluded << "\nworst_rel_error "
      << fmt("%.3e", s.worst_rel_error) << "\n";
  return s.failures == 0 ? kExitOk : kExitValidation;
}

int cmd_config(const Options& o, std::ostream& out) {
  out << dump_config(config_or_default(o.config));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"panclust: learned point-cloud instance clustering toolkit", "panclust"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "experiment config (YAML)");
    sub->add_option("-j,--jobs", o.jobs, "scene-level worker threads")->check(CLI::PositiveNumber);
  };
  auto add_post = [&o](CLI::App* sub) {
    sub->add_flag("--post-splitter", o.post_splitter, "split oversized instances");
    sub->add_flag("--post-merger", o.post_merger, "merge nearby same-class instances");
    sub->add_flag("--post-cyclists", o.post_cyclists, "apply rider re-labeling rules");
    sub->add_flag("--post-all", o.post_all, "all three steps");
  };

  auto* gen = app.add_subcommand("generate", "write synthetic scenes");
  add_common(gen);
  gen->add_option("-o,--out", o.out_dir, "output directory")->required();
  gen->add_option("-n,--count", o.count, "number of scenes")->required();
  gen->add_option("--start", o.start, "first stream index (default 0)");
  gen->add_option("--format", o.format, "pcscene or kitti")->check(CLI::IsMember({"pcscene", "kitti"}));

  auto* tr = app.add_subcommand("train", "train the toy model");
  add_common(tr);
  tr->add_option("-s,--scenes", o.scenes, "scene directory (default: the config's synthetic stream)");
  tr->add_option("-o,--checkpoint", o.checkpoint, "checkpoint output")->required();
  tr->add_option("--curve", o.curve, "loss curve CSV output");

  auto* inf = app.add_subcommand("infer", "predict panoptic labels");
  add_common(inf);
  inf->add_option("-m,--checkpoint", o.checkpoint, "model checkpoint")->required();
  inf->add_option("-s,--scenes", o.scenes, "scene directory")->required();
  inf->add_option("-o,--out", o.out_dir, "prediction directory")->required();
  add_post(inf);

  auto* post = app.add_subcommand("postprocess", "apply post-processing to stored predictions");
  add_common(post);
  post->add_option("-p,--pred", o.pred, "input prediction directory")->required();
  post->add_option("-s,--scenes", o.scenes, "scene directory")->required();
  post->add_option("-o,--out", o.out_dir, "output directory")->required();
  add_post(post);

  auto* pert = app.add_subcommand("perturb", "write fragmented or merged ground truth as predictions");
  add_common(pert);
  pert->add_option("-s,--scenes", o.scenes, "scene directory")->required();
  pert->add_option("-o,--out", o.out_dir, "output directory")->required();
  pert->add_option("--fragment", o.fragment, "cut every instance into this many parts");
  pert->add_flag("--merge", o.merge, "merge same-class instances pairwise");

  auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
  add_common(ev);
  ev->add_option("-p,--pred", o.pred, "prediction directory")->required();
  ev->add_option("-g,--gt", o.gt, "ground-truth scene directory")->required();
  ev->add_option("-r,--report", o.report, "JSON report output");

  auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gc->set_help_flag("--help", "Print this help message and exit");
  gc->add_option("loss", o.loss, "impurity, fragmentation, wce, lovasz or total")->required();
  gc->add_option("--trials", o.trials, "random logit tensors");
  gc->add_option("--h", o.h, "central-difference step");
  gc->add_option("--tolerance", o.tolerance, "maximum relative error");
  gc->add_option("--seed", o.seed, "trial seed");

  auto* cfg = app.add_subcommand("config", "print the resolved experiment config");
  cfg->add_option("-c,--config", o.config, "experiment config (YAML)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    if (tr->parsed()) return cmd_train(o, out, err);
    if (inf->parsed()) return cmd_infer(o, out);
    if (post->parsed()) return cmd_postprocess(o, out);
    if (pert->parsed()) return cmd_perturb(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (gc->parsed()) return cmd_gradcheck(o, out);
    if (cfg->parsed()) return cmd_config(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Io ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace panclust
