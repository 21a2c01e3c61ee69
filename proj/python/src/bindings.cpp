#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "modist/cli.hpp"
#include "modist/contrastive.hpp"
#include "modist/error.hpp"
#include "modist/experiment.hpp"
#include "modist/motion.hpp"
#include "modist/synthvid.hpp"

namespace py = pybind11;
using namespace modist;

namespace {

Embedding to_embedding(const std::vector<double>& v, Role role, std::int64_t idx) {
  return Embedding{v, Modality::visual, role, idx};
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

double py_info_nce(const std::vector<double>& q, const std::vector<double>& k,
                   const std::vector<std::vector<double>>& negatives, double tau) {
  std::vector<Embedding> negs;
  negs.reserve(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    negs.push_back(to_embedding(negatives[i], Role::negative, static_cast<std::int64_t>(i) + 1));
  }
  return info_nce(to_embedding(q, Role::query, 0), to_embedding(k, Role::key, 0), negs, tau);
}

py::array_t<float> py_sobel(py::array_t<float, py::array::c_style | py::array::forcecast> magnitude) {
  if (magnitude.ndim() != 2) throw py::value_error("expected a 2-d array");
  const int h = static_cast<int>(magnitude.shape(0)), w = static_cast<int>(magnitude.shape(1));
  MotionMap m{TensorF({h, w}), MotionKind::flow_magnitude};
  std::copy(magnitude.data(), magnitude.data() + magnitude.size(), m.values.data());
  const MotionMap e = sobel_edge_map(m);
  py::array_t<float> out({h, w});
  std::copy(e.values.vec().begin(), e.values.vec().end(), out.mutable_data());
  return out;
}

py::dict manifest_counts(const CorpusManifests& c) {
  py::dict d;
  d["pretrain"] = c.pretrain.entries.size();
  d["probe_train"] = c.probe_train.entries.size();
  d["probe_test"] = c.probe_test.entries.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Motion-distilled video representation learning on synthetic scenes";

  py::register_exception<Error>(m, "ModistError");

  m.def("run_cli", &run_cli, py::arg("args"),
        "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");

  m.def("generate_corpus",
        [](const std::filesystem::path& out_dir, int pretrain_videos, int probe_videos, std::uint64_t seed) {
          CorpusManifests c;
          {
            py::gil_scoped_release release;
            c = generate_corpus(SceneDistribution{}, pretrain_videos, probe_videos, seed, out_dir);
          }
          return manifest_counts(c);
        },
        py::arg("out_dir"), py::arg("pretrain_videos") = 512, py::arg("probe_videos") = 256, py::arg("seed") = 0);

  m.def("info_nce", &py_info_nce, py::arg("q"), py::arg("k"), py::arg("negatives"), py::arg("tau") = 0.1,
        "InfoNCE of one query against its positive and a list of negatives. Inputs must be unit vectors.");

  m.def("sobel_edge_map", &py_sobel, py::arg("magnitude"), "Clamped Sobel magnitude of a 2-d motion map.");

  m.def("read_records",
        [](const std::filesystem::path& path) {
          py::list out;
          for (const auto& r : read_records(path)) {
            py::dict d;
            d["name"] = r.name;
            d["protocol"] = r.protocol;
            d["top1"] = r.top1;
            d["seed"] = r.seed;
            d["checkpoint"] = r.checkpoint;
            d["fraction"] = r.fraction;
            out.append(d);
          }
          return out;
        },
        py::arg("path"));

  m.attr("FLOW_EDGE_CLAMP") = kFlowEdgeClamp;
}
