// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/metrics.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace panclust {

PanopticEvaluator::PanopticEvaluator(const ClassTaxonomy& taxonomy)
    : taxonomy_(&taxonomy), stats_(taxonomy.num_classes()) {}

void PanopticEvaluator::add(std::span<const ClassId> pred_sem, std::span<const InstanceId> pred_inst,
                            std::span<const ClassId> gt_sem, std::span<const InstanceId> gt_inst) {
  const auto n = gt_sem.size();
  if (pred_sem.size() != n || pred_inst.size() != n || gt_inst.size() != n)
    fail("evaluate: prediction has " + std::to_string(pred_sem.size()) + " points, ground truth " + std::to_string(n));
  const auto& tax = *taxonomy_;

  // Segment key: (class, instance) for things, (class, 0) for stuff; none for ignore or
  // thing points without an instance.
  using Key = std::pair<ClassId, InstanceId>;
  auto segment = [&tax](ClassId c, InstanceId i) -> std::optional<Key> {
    if (tax.is_stuff(c)) return Key{c, 0};
    if (tax.is_thing(c) && i > 0) return Key{c, i};
    return std::nullopt;
  };

  std::map<Key, std::size_t> pred_size, gt_size;
  std::map<std::pair<Key, Key>, std::size_t> overlap;
  for (std::size_t p = 0; p < n; ++p) {
    const ClassId g = gt_sem[p], c = pred_sem[p];
    if (!tax.valid(g) || !tax.valid(c)) fail("evaluate: class id out of range at point " + std::to_string(p));
    if (tax.is_ignore(g)) continue;
    if (c == g) ++stats_[g].intersection;
    ++stats_[g].union_;
    if (c != g && !tax.is_ignore(c)) ++stats_[c].union_;

    const auto gs = segment(g, gt_inst[p]);
    const auto ps = segment(c, pred_inst[p]);
    if (gs) ++gt_size[*gs];
    if (ps) ++pred_size[*ps];
    if (gs && ps && c == g) ++overlap[{*ps, *gs}];
  }

  std::map<Key, bool> gt_matched, pred_matched;
  for (const auto& [pair, inter] : overlap) {
    const auto& [ps, gs] = pair;
    const double uni = static_cast<double>(pred_size[ps] + gt_size[gs] - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (!(iou > 0.5)) continue;
    if (gt_matched[gs] || pred_matched[ps]) fail("evaluate: non-unique segment match");
    gt_matched[gs] = pred_matched[ps] = true;
    ++stats_[gs.first].tp;
    stats_[gs.first].iou_sum += iou;
  }
  for (const auto& [gs, size] : gt_size)
    if (!gt_matched[gs]) ++stats_[gs.first].fn;
  for (const auto& [ps, size] : pred_size)
    if (!pred_matched[ps]) ++stats_[ps.first].fp;
}

void PanopticEvaluator::merge(const PanopticEvaluator& other) {
  if (other.stats_.size() != stats_.size()) fail("evaluate: merging evaluators of different taxonomies");
  for (std::size_t c = 0; c < stats_.size(); ++c) {
    stats_[c].tp += other.stats_[c].tp;
    stats_[c].fp += other.stats_[c].fp;
    stats_[c].fn += other.stats_[c].fn;
    stats_[c].iou_sum += other.stats_[c].iou_sum;
    stats_[c].intersection += other.stats_[c].intersection;
    stats_[c].union_ += other.stats_[c].union_;
  }
}

PanopticReport PanopticEvaluator::report() const {
  const auto& tax = *taxonomy_;
  PanopticReport r;
  r.per_class.resize(stats_.size());

  struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) { sum += v, ++n; }
    double get() const { return n ? sum / static_cast<double>(n) : 0.0; }
  };
  Mean pq, sq, rq, dagger, pq_th, sq_th, rq_th, pq_st, sq_st, rq_st, miou;

  for (std::size_t c = 0; c < stats_.size(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (tax.is_ignore(cls)) continue;
    const auto& s = stats_[c];
    auto& out = r.per_class[c];
    out.tp = s.tp;
    out.fp = s.fp;
    out.fn = s.fn;
    if (s.union_ > 0) {
      out.iou = static_cast<double>(s.intersection) / static_cast<double>(s.union_);
      miou.add(out.iou);
    }
    out.present = s.tp + s.fp + s.fn > 0;
    if (!out.present) continue;
    const double tp = static_cast<double>(s.tp);
    out.sq = s.tp ? s.iou_sum / tp : 0.0;
    out.rq = tp / (tp + 0.5 * static_cast<double>(s.fp) + 0.5 * static_cast<double>(s.fn));
    out.pq = out.sq * out.rq;

    pq.add(out.pq);
    sq.add(out.sq);
    rq.add(out.rq);
    if (tax.is_thing(cls)) {
      dagger.add(out.pq);
      pq_th.add(out.pq);
      sq_th.add(out.sq);
      rq_th.add(out.rq);
    } else {
      dagger.add(out.iou);
      pq_st.add(out.pq);
      sq_st.add(out.sq);
      rq_st.add(out.rq);
    }
  }
  r.pq = pq.get();
  r.sq = sq.get();
  r.rq = rq.get();
  r.pq_dagger = dagger.get();
  r.pq_th = pq_th.get();
  r.sq_th = sq_th.get();
  r.rq_th = rq_th.get();
  r.pq_st = pq_st.get();
  r.sq_st = sq_st.get();
  r.rq_st = rq_st.get();
  r.miou = miou.get();
  return r;
}

PanopticReport evaluate(const PanopticLabel& pred, const Scene& gt, const ClassTaxonomy& taxonomy) {
  PanopticEvaluator ev(taxonomy);
  ev.add(pred, gt);
  return ev.report();
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::pair<std::string, double>> aggregates(const PanopticReport& r) {
  return {{"PQ", r.pq},       {"PQ_dagger", r.pq_dagger}, {"SQ", r.sq},       {"RQ", r.rq},
          {"PQ_Th", r.pq_th}, {"SQ_Th", r.sq_th},         {"RQ_Th", r.rq_th}, {"PQ_St", r.pq_st},
          {"SQ_St", r.sq_st}, {"RQ_St", r.rq_st},         {"mIoU", r.miou}};
}

}  // namespace

std::string report_table(const PanopticReport& report, const ClassTaxonomy& taxonomy) {
  std::ostringstream os;
  for (const auto& [k, v] : aggregates(report)) os << k << ' ' << fixed(v) << '\n';
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (taxonomy.is_ignore(cls)) continue;
    const auto& s = report.per_class[c];
    const auto& name = taxonomy.name(cls);
    os << "class." << name << ".PQ " << fixed(s.pq) << '\n'
       << "class." << name << ".SQ " << fixed(s.sq) << '\n'
       << "class." << name << ".RQ " << fixed(s.rq) << '\n'
       << "class." << name << ".IoU " << fixed(s.iou) << '\n'
       << "class." << name << ".TP " << s.tp << '\n'
       << "class." << name << ".FP " << s.fp << '\n'
       << "class." << name << ".FN " << s.fn << '\n';
  }
  return os.str();
}

std::string report_json(const PanopticReport& report, const ClassTaxonomy& taxonomy) {
  nlohmann::ordered_json j;
  j["format"] = "panclust-report";
  j["version"] = 1;
  for (const auto& [k, v] : aggregates(report)) j["aggregate"][k] = v;
  j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (taxonomy.is_ignore(cls)) continue;
    const auto& s = report.per_class[c];
    nlohmann::ordered_json e;
    e["id"] = cls;
    e["name"] = taxonomy.name(cls);
    e["kind"] = taxonomy.is_thing(cls) ? "thing" : "stuff";
    e["present"] = s.present;
    e["PQ"] = s.pq;
    e["SQ"] = s.sq;
    e["RQ"] = s.rq;
    e["IoU"] = s.iou;
    e["TP"] = s.tp;
    e["FP"] = s.fp;
    e["FN"] = s.fn;
    j["classes"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace panclust
