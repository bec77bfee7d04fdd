// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "panclust/core.hpp"
#include "panclust/dataio.hpp"
#include "panclust/fusion.hpp"
#include "panclust/gradcheck.hpp"
#include "panclust/losses.hpp"
#include "panclust/metrics.hpp"
#include "panclust/postproc.hpp"
#include "panclust/softmat.hpp"
#include "panclust/synth.hpp"

namespace py = pybind11;
using namespace panclust;

namespace {

const ClassTaxonomy& micro() {
  static const ClassTaxonomy tax = ClassTaxonomy::micro();
  return tax;
}

std::vector<Point3> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& xyz) {
  if (xyz.ndim() != 2 || xyz.shape(1) != 3) throw py::value_error("points must have shape (P, 3)");
  const auto r = xyz.unchecked<2>();
  std::vector<Point3> pts(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) pts[i] = {r(i, 0), r(i, 1), r(i, 2), {}};
  return pts;
}

py::array_t<double> from_points(const std::vector<Point3>& pts) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
    w(i, 2) = pts[i].z;
  }
  return out;
}

py::dict report_dict(const PanopticReport& r) {
  py::dict d;
  d["PQ"] = r.pq;
  d["SQ"] = r.sq;
  d["RQ"] = r.rq;
  d["PQ_dagger"] = r.pq_dagger;
  d["PQ_Th"] = r.pq_th;
  d["SQ_Th"] = r.sq_th;
  d["RQ_Th"] = r.rq_th;
  d["PQ_St"] = r.pq_st;
  d["SQ_St"] = r.sq_st;
  d["RQ_St"] = r.rq_st;
  d["mIoU"] = r.miou;
  py::dict classes;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (micro().is_ignore(cls)) continue;
    const auto& s = r.per_class[c];
    py::dict e;
    e["PQ"] = s.pq;
    e["SQ"] = s.sq;
    e["RQ"] = s.rq;
    e["IoU"] = s.iou;
    e["TP"] = s.tp;
    e["FP"] = s.fp;
    e["FN"] = s.fn;
    classes[py::str(micro().name(cls))] = e;
  }
  d["classes"] = classes;
  return d;
}

PanopticLabel label_of(const std::vector<ClassId>& sem, const std::vector<InstanceId>& inst) {
  return PanopticLabel(sem, inst, micro());
}

}  // namespace

PYBIND11_MODULE(_panclust, m) {
  m.doc() = "Learned instance clustering losses, panoptic metrics and post-processing (micro taxonomy).";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("class_names", [] { return micro().spec().class_names; });
  m.def("thing_ids", [] { return micro().thing_ids(); });
  m.def("stuff_ids", [] { return micro().stuff_ids(); });

  m.def("soft_matrix", [](const std::vector<InstanceId>& inst_gt, const RowMatrix& inst_prob) {
    const auto s = build_soft_matrix(inst_gt, inst_prob);
    return py::make_tuple(s.values, s.gt_ids);
  }, py::arg("inst_gt"), py::arg("inst_prob"), "Soft confusion matrix (G x N) and its object ids.");

  m.def("impurity", [](const RowMatrix& s) {
    const auto r = impurity_loss(soft_matrix_from_values(s));
    return py::make_tuple(r.value, r.grad);
  }, py::arg("s"), "Impurity of a soft confusion matrix and its gradient.");

  m.def("fragmentation", [](const RowMatrix& s) {
    const auto r = fragmentation_loss(soft_matrix_from_values(s));
    return py::make_tuple(r.value, r.grad);
  }, py::arg("s"), "Fragmentation of a soft confusion matrix and its frozen-denominator gradient.");

  m.def("lovasz_softmax", [](const RowMatrix& prob, const std::vector<ClassId>& sem_gt) {
    const auto r = lovasz_softmax(prob, sem_gt, micro().ignore_id());
    return py::make_tuple(r.value, r.grad);
  }, py::arg("prob"), py::arg("sem_gt"));

  m.def("gradcheck", [](const std::string& loss, std::size_t trials, double h, double tolerance, std::uint64_t seed) {
    const auto s = run_gradcheck(parse_loss_kind(loss), trials, h, tolerance, seed);
    py::dict d;
    d["trials"] = s.trials;
    d["failures"] = s.failures;
    d["worst_rel_error"] = s.worst_rel_error;
    d["checked"] = s.checked;
    d["excluded"] = s.excluded;
    return d;
  }, py::arg("loss"), py::arg("trials") = 100, py::arg("h") = 1e-5, py::arg("tolerance") = 1e-4, py::arg("seed") = 1);

  m.def("dbscan", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& xyz, double eps,
                     std::size_t min_pts) { return dbscan(to_points(xyz), {eps, min_pts}); },
        py::arg("points"), py::arg("eps"), py::arg("min_pts"));

  m.def("generate", [](std::uint64_t seed, std::size_t index, std::size_t max_points) {
    auto c = synth::SynthConfig::micro_defaults();
    c.seed = seed;
    c.max_points = max_points;
    const auto s = synth::generate(c, index, micro());
    return py::make_tuple(from_points(s.points()), s.sem_gt(), s.inst_gt());
  }, py::arg("seed"), py::arg("index"), py::arg("max_points") = 0, "Synthetic scene as (points, sem, inst).");

  m.def("fuse", [](const std::vector<ClassId>& sem, const std::vector<std::uint32_t>& cluster) {
    const auto l = fuse(sem, cluster, micro());
    return l.inst();
  }, py::arg("sem"), py::arg("cluster"), "Instance ids from semantic labels and cluster indices.");

  m.def("evaluate", [](const std::vector<ClassId>& pred_sem, const std::vector<InstanceId>& pred_inst,
                       const std::vector<ClassId>& gt_sem, const std::vector<InstanceId>& gt_inst) {
    PanopticEvaluator ev(micro());
    ev.add(pred_sem, pred_inst, gt_sem, gt_inst);
    return report_dict(ev.report());
  }, py::arg("pred_sem"), py::arg("pred_inst"), py::arg("gt_sem"), py::arg("gt_inst"));

  m.def("post_process", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& xyz,
                           const std::vector<ClassId>& sem, const std::vector<InstanceId>& inst, bool splitter,
                           bool merger, bool cyclists) {
    const auto out = post_process(label_of(sem, inst), to_points(xyz), micro(), {splitter, merger, cyclists});
    return py::make_tuple(out.sem(), out.inst());
  }, py::arg("points"), py::arg("sem"), py::arg("inst"), py::arg("splitter") = true, py::arg("merger") = true,
        py::arg("cyclists") = true);

  m.def("pack_label", &io::pack_label, py::arg("sem"), py::arg("inst"));
  m.def("unpack_labels", [](const std::vector<std::uint32_t>& words) {
    const auto raw = io::unpack_labels(words);
    return py::make_tuple(raw.sem, raw.inst);
  }, py::arg("words"));
}
