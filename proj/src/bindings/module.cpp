#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "facepaste/bayesopt.hpp"
#include "facepaste/oracle.hpp"
#include "facepaste/paste_attack.hpp"
#include "facepaste/pgd_attack.hpp"
#include "facepaste/runner.hpp"
#include "facepaste/similarity.hpp"
#include "facepaste/toy_faces.hpp"

namespace py = pybind11;
using namespace facepaste;

namespace {

RasterImage image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) {
    throw std::invalid_argument("expected a (H, W) or (H, W, C) array");
  }
  RasterImage img;
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  img.data.assign(a.data(), a.data() + a.size());
  return img;
}

py::array image_to_array(const RasterImage& img) {
  py::array_t<float> a({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "face-pasting attack core";

  py::enum_<MaskMode>(m, "MaskMode")
      .value("manual", MaskMode::manual)
      .value("automatic", MaskMode::automatic);

  py::class_<PasteParams>(m, "PasteParams")
      .def(py::init<>())
      .def_readwrite("cx", &PasteParams::cx)
      .def_readwrite("cy", &PasteParams::cy)
      .def_readwrite("sx", &PasteParams::sx)
      .def_readwrite("sy", &PasteParams::sy)
      .def_readwrite("theta", &PasteParams::theta)
      .def_readwrite("mask_mode", &PasteParams::mask_mode)
      .def_readwrite("bias", &PasteParams::bias)
      .def_readwrite("slope", &PasteParams::slope)
      .def_readwrite("sigma", &PasteParams::sigma);

  py::class_<AttackSpec>(m, "AttackSpec")
      .def(py::init<>())
      .def_readwrite("source_id", &AttackSpec::source_id)
      .def_readwrite("target_id", &AttackSpec::target_id)
      .def_readwrite("mask_mode", &AttackSpec::mask_mode)
      .def_readwrite("budget", &AttackSpec::budget)
      .def_readwrite("init_queries", &AttackSpec::init_queries);

  py::class_<QueryResult>(m, "QueryResult")
      .def_readonly("confidence", &QueryResult::confidence)
      .def_readonly("stealthiness", &QueryResult::stealthiness)
      .def_readonly("probabilities", &QueryResult::probabilities)
      .def_readonly("query_index", &QueryResult::query_index);

  py::class_<FaceSet>(m, "FaceSet")
      .def("__len__", [](const FaceSet& f) { return f.images.size(); })
      .def("image", [](const FaceSet& f, int i) { return image_to_array(f.images.at(i)); })
      .def_property_readonly("height", &FaceSet::height)
      .def_property_readonly("width", &FaceSet::width);

  py::class_<MaskSet>(m, "MaskSet");

  py::class_<SimulatedOracle>(m, "SimulatedOracle")
      .def(py::init([](const FaceSet& faces) { return SimulatedOracle(faces); }))
      .def("query",
           [](SimulatedOracle& o, const py::array_t<float, py::array::c_style |
                                                               py::array::forcecast>& img,
              int s, int t) { return o.query(image_from_array(img), s, t); })
      .def("classify",
           [](const SimulatedOracle& o,
              const py::array_t<float, py::array::c_style | py::array::forcecast>& img) {
             return o.classify(image_from_array(img));
           });

  py::class_<BoObservation>(m, "BoObservation")
      .def_readonly("params", &BoObservation::params)
      .def_readonly("result", &BoObservation::result)
      .def_readonly("objective", &BoObservation::objective);

  py::class_<BoState>(m, "BoState")
      .def_readonly("history", &BoState::history)
      .def_readonly("best_objective", &BoState::best_objective)
      .def_readonly("best_index", &BoState::best_index)
      .def_readonly("error", &BoState::error);

  m.def("generate_faces", &generate_toy_faces, py::arg("seed"));
  m.def("load_faces", &load_faces, py::arg("dir"));
  m.def("write_faces", &write_faces, py::arg("faces"), py::arg("dir"));
  m.def("build_mask_set", &build_mask_set, py::arg("faces"), py::arg("mask_dir") = "");

  m.def("ssim",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
          return ssim(image_from_array(a), image_from_array(b));
        });

  m.def("render",
        [](const FaceSet& faces, const MaskSet& masks, int s, int t, const PasteParams& p) {
          return image_to_array(render(faces, masks, s, t, p));
        });

  m.def("objective", &objective);
  m.def("is_success", &is_success, py::arg("result"), py::arg("target_id"));

  m.def("optimize",
        [](const AttackSpec& spec, SimulatedOracle& oracle, const FaceSet& faces,
           const MaskSet& masks, std::uint64_t seed) {
          return optimize(spec, oracle, faces, masks, seed);
        },
        py::arg("spec"), py::arg("oracle"), py::arg("faces"), py::arg("masks"), py::arg("seed"));
}
