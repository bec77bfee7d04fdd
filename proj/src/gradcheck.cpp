// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "panclust/random.hpp"

namespace panclust {

GradCheckReport finite_difference_check(const LogitLoss& loss, const RowMatrix& logits, double h, double tolerance) {
  if (!(h > 0.0) || h > 1e-2) fail("gradcheck: step must lie in (0, 1e-2]");
  GradCheckReport report;
  const RowMatrix analytic = loss.gradient(logits);
  std::vector<bool> skip(static_cast<std::size_t>(logits.rows()), false);
  if (loss.near_tie) skip = loss.near_tie(logits, 10.0 * h);

  RowMatrix probe = logits;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (skip[static_cast<std::size_t>(r)]) {
      report.excluded += static_cast<std::size_t>(logits.cols());
      continue;
    }
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double x = logits(r, c);
      probe(r, c) = x + h;
      const double up = loss.value(probe);
      probe(r, c) = x - h;
      const double down = loss.value(probe);
      probe(r, c) = x;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic(r, c);
      const double scale = std::max({std::abs(a), std::abs(numeric), kRelErrorFloor});
      const double err = std::abs(a - numeric) / scale;
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_row = r;
        report.worst_col = c;
      }
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "impurity") return LossKind::Impurity;
  if (name == "fragmentation") return LossKind::Fragmentation;
  if (name == "wce" || name == "cross-entropy") return LossKind::CrossEntropy;
  if (name == "lovasz") return LossKind::Lovasz;
  if (name == "total") return LossKind::Total;
  fail("unknown loss '" + name + "' (expected impurity, fragmentation, wce, lovasz or total)");
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Impurity: return "impurity";
    case LossKind::Fragmentation: return "fragmentation";
    case LossKind::CrossEntropy: return "wce";
    case LossKind::Lovasz: return "lovasz";
    case LossKind::Total: return "total";
  }
  return "?";
}

std::vector<bool> soft_matrix_tie_rows(const SoftMatrix& s, double margin, bool fragments) {
  std::vector<bool> tied(s.rows(), false);
  if (s.empty()) return tied;
  const auto& v = s.values;
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    const double top = v.col(c).maxCoeff();
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      if (top - v(r, c) < margin) {
        // only a problem when another row is also close to the top
        std::size_t close = 0;
        for (Eigen::Index q = 0; q < v.rows(); ++q) close += (top - v(q, c) < margin);
        if (close > 1) tied[r] = true;
      }
  }
  if (fragments) {
    std::vector<std::vector<double>> per_row(s.rows());
    for (const auto& cell : column_maxima(s)) {
      const double x = v(cell.row, cell.col);
      if (std::abs(x - kFragmentClamp) < margin) tied[cell.row] = true;
      per_row[cell.row].push_back(x);
    }
    for (std::size_t r = 0; r < s.rows(); ++r) {
      auto& xs = per_row[r];
      if (xs.size() < 2) continue;
      std::sort(xs.rbegin(), xs.rend());
      if (xs[0] - xs[1] < margin) tied[r] = true;
    }
  }
  return tied;
}

std::vector<bool> lovasz_tie_points(const RowMatrix& sem_prob, std::span<const ClassId> sem_gt, ClassId ignore_id,
                                    double margin) {
  const auto points = static_cast<std::size_t>(sem_prob.rows());
  std::vector<bool> tied(points, false);
  std::vector<std::pair<double, std::size_t>> errors;
  for (Eigen::Index c = 0; c < sem_prob.cols(); ++c) {
    errors.clear();
    for (std::size_t p = 0; p < points; ++p) {
      if (sem_gt[p] == ignore_id) continue;
      const double fg = sem_gt[p] == c ? 1.0 : 0.0;
      errors.emplace_back(std::abs(fg - sem_prob(static_cast<Eigen::Index>(p), c)), p);
    }
    std::sort(errors.begin(), errors.end());
    for (std::size_t k = 1; k < errors.size(); ++k)
      if (errors[k].first - errors[k - 1].first < margin) tied[errors[k].second] = tied[errors[k - 1].second] = true;
  }
  return tied;
}

namespace {

std::vector<bool> rows_to_points(const SoftMatrix& s, const std::vector<bool>& rows, std::size_t points) {
  std::vector<bool> out(points, false);
  for (std::size_t r = 0; r < s.rows(); ++r)
    if (rows[r])
      for (auto p : s.point_index[r]) out[p] = true;
  return out;
}

}  // namespace

LogitLoss make_logit_loss(LossKind kind, const Scene& scene, const ClassTaxonomy& taxonomy,
                          const LossWeights& weights, std::size_t num_clusters, const RowMatrix& anchor) {
  const auto classes = static_cast<Eigen::Index>(taxonomy.num_classes());
  const auto clusters = static_cast<Eigen::Index>(num_clusters);
  const auto& inst_gt = scene.inst_gt();
  const auto points = scene.size();
  const ClassId ignore = taxonomy.ignore_id();
  LogitLoss loss;

  switch (kind) {
    case LossKind::Impurity:
      loss.value = [&inst_gt](const RowMatrix& z) { return impurity_loss(inst_gt, softmax_rows(z)).value; };
      loss.gradient = [&inst_gt](const RowMatrix& z) {
        const RowMatrix p = softmax_rows(z);
        return softmax_backward(p, impurity_loss(inst_gt, p).grad);
      };
      loss.near_tie = [&inst_gt, points](const RowMatrix& z, double margin) {
        const auto s = build_soft_matrix(inst_gt, softmax_rows(z));
        return rows_to_points(s, soft_matrix_tie_rows(s, margin, false), points);
      };
      break;

    case LossKind::Fragmentation: {
      const RowMatrix frozen = build_soft_matrix(inst_gt, softmax_rows(anchor)).values;
      loss.value = [&inst_gt, frozen](const RowMatrix& z) {
        return fragmentation_loss(inst_gt, softmax_rows(z), &frozen).value;
      };
      loss.gradient = [&inst_gt, frozen](const RowMatrix& z) {
        const RowMatrix p = softmax_rows(z);
        return softmax_backward(p, fragmentation_loss(inst_gt, p, &frozen).grad);
      };
      loss.near_tie = [&inst_gt, points](const RowMatrix& z, double margin) {
        const auto s = build_soft_matrix(inst_gt, softmax_rows(z));
        return rows_to_points(s, soft_matrix_tie_rows(s, margin, true), points);
      };
      break;
    }

    case LossKind::CrossEntropy: {
      auto point_w = small_instance_weights(inst_gt, weights.small_instance_factor, weights.small_instance_threshold);
      auto class_w = weights.class_weights;
      loss.value = [&scene, point_w, class_w, ignore](const RowMatrix& z) {
        return weighted_cross_entropy(softmax_rows(z), scene.sem_gt(), class_w, point_w, ignore).value;
      };
      loss.gradient = [&scene, point_w, class_w, ignore](const RowMatrix& z) {
        const RowMatrix p = softmax_rows(z);
        return softmax_backward(p, weighted_cross_entropy(p, scene.sem_gt(), class_w, point_w, ignore).grad);
      };
      break;
    }

    case LossKind::Lovasz:
      loss.value = [&scene, ignore](const RowMatrix& z) {
        return lovasz_softmax(softmax_rows(z), scene.sem_gt(), ignore).value;
      };
      loss.gradient = [&scene, ignore](const RowMatrix& z) {
        const RowMatrix p = softmax_rows(z);
        return softmax_backward(p, lovasz_softmax(p, scene.sem_gt(), ignore).grad);
      };
      loss.near_tie = [&scene, ignore](const RowMatrix& z, double margin) {
        return lovasz_tie_points(softmax_rows(z), scene.sem_gt(), ignore, margin);
      };
      break;

    case LossKind::Total: {
      if (anchor.cols() != classes + clusters) fail("gradcheck: total loss expects [semantic | instance] logits");
      const RowMatrix frozen = build_soft_matrix(inst_gt, softmax_rows(anchor.rightCols(clusters))).values;
      auto evaluate = [&scene, &taxonomy, weights, frozen, classes, clusters](const RowMatrix& z) {
        const RowMatrix sem = softmax_rows(z.leftCols(classes));
        const RowMatrix inst = softmax_rows(z.rightCols(clusters));
        TotalLossOptions opt;
        opt.frozen_fragments = &frozen;
        auto t = total_loss(scene, Prediction(sem, inst), weights, taxonomy, opt);
        return std::make_tuple(t, sem, inst);
      };
      loss.value = [evaluate](const RowMatrix& z) { return std::get<0>(evaluate(z)).value; };
      loss.gradient = [evaluate, classes, clusters](const RowMatrix& z) {
        auto [t, sem, inst] = evaluate(z);
        RowMatrix g(z.rows(), z.cols());
        g.leftCols(classes) = softmax_backward(sem, t.sem_grad);
        g.rightCols(clusters) = softmax_backward(inst, t.inst_grad);
        return g;
      };
      loss.near_tie = [&scene, &inst_gt, ignore, points, classes, clusters](const RowMatrix& z, double margin) {
        const auto s = build_soft_matrix(inst_gt, softmax_rows(z.rightCols(clusters)));
        auto tied = rows_to_points(s, soft_matrix_tie_rows(s, margin, true), points);
        auto lov = lovasz_tie_points(softmax_rows(z.leftCols(classes)), scene.sem_gt(), ignore, margin);
        for (std::size_t p = 0; p < points; ++p) tied[p] = tied[p] || lov[p];
        return tied;
      };
      break;
    }
  }
  return loss;
}

GradCheckTrial random_gradcheck_trial(LossKind kind, const ClassTaxonomy& taxonomy, std::uint64_t seed) {
  Rng rng(seed, 0x6772616463ull);
  const auto& things = taxonomy.thing_ids();
  const auto& stuff = taxonomy.stuff_ids();
  const auto objects = static_cast<std::size_t>(rng.uniform_int(1, 4));
  const auto clusters = static_cast<std::size_t>(rng.uniform_int(2, 8));

  std::vector<Point3> pts;
  std::vector<ClassId> sem;
  std::vector<InstanceId> inst;
  for (std::size_t o = 0; o < objects; ++o) {
    const ClassId c = things[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(things.size()) - 1))];
    const auto size = rng.uniform_int(2, 6);
    for (std::int64_t k = 0; k < size; ++k) {
      sem.push_back(c);
      inst.push_back(static_cast<InstanceId>(o + 1));
    }
  }
  const auto background = rng.uniform_int(2, 10);
  for (std::int64_t k = 0; k < background; ++k) {
    const bool ignore = !stuff.empty() && rng.uniform() < 0.1;
    sem.push_back(ignore || stuff.empty()
                      ? taxonomy.ignore_id()
                      : stuff[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(stuff.size()) - 1))]);
    inst.push_back(0);
  }
  // shuffle so objects are interleaved with background
  for (std::size_t i = sem.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(sem[i - 1], sem[j]);
    std::swap(inst[i - 1], inst[j]);
  }
  for (std::size_t p = 0; p < sem.size(); ++p) pts.push_back({rng.normal(), rng.normal(), rng.normal(), {}});

  std::size_t cols = 0;
  switch (kind) {
    case LossKind::Impurity:
    case LossKind::Fragmentation: cols = clusters; break;
    case LossKind::CrossEntropy:
    case LossKind::Lovasz: cols = taxonomy.num_classes(); break;
    case LossKind::Total: cols = taxonomy.num_classes() + clusters; break;
  }
  RowMatrix logits(static_cast<Eigen::Index>(sem.size()), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) logits(r, c) = rng.normal(0.0, 2.0);

  return {Scene(std::move(pts), std::move(sem), std::move(inst), taxonomy), std::move(logits), clusters};
}

GradCheckSummary run_gradcheck(LossKind kind, std::size_t trials, double h, double tolerance, std::uint64_t seed) {
  const auto taxonomy = ClassTaxonomy::micro();
  LossWeights weights;
  weights.small_instance_threshold = 4;  // exercise the small-instance factor on tiny objects
  GradCheckSummary summary;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto trial = random_gradcheck_trial(kind, taxonomy, Rng::mix(seed, t));
    weights.class_weights = inverse_log_frequency_weights(std::span(&trial.scene, 1), taxonomy);
    const auto loss = make_logit_loss(kind, trial.scene, taxonomy, weights, trial.num_clusters, trial.logits);
    const auto report = finite_difference_check(loss, trial.logits, h, tolerance);
    ++summary.trials;
    summary.failures += report.passed ? 0 : 1;
    summary.worst_rel_error = std::max(summary.worst_rel_error, report.max_rel_error);
    summary.checked += report.checked;
    summary.excluded += report.excluded;
  }
  return summary;
}

}  // namespace panclust
