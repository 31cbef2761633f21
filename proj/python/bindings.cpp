#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sgboost/checkpoint.hpp"
#include "sgboost/error.hpp"
#include "sgboost/harness.hpp"

namespace py = pybind11;
using namespace sgboost;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Array to_array(const ImportanceMap& m) {
  Array out({py::ssize_t(m.height()), py::ssize_t(m.width())});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

ImportanceMap to_map(const Array& a) {
  if (a.ndim() != 2) throw GeometryError("importance map must be 2-D");
  ImportanceMap m(a.shape(0), a.shape(1));
  for (py::ssize_t r = 0; r < a.shape(0); ++r)
    for (py::ssize_t c = 0; c < a.shape(1); ++c) m.at(r, c) = a.at(r, c);
  return m;
}

Tensor scores_2d(const Array& a) {
  if (a.ndim() != 2) throw GeometryError("scores must be an [N, M] array");
  return to_tensor(a);
}

RunConfig config_from(const py::dict& overrides) {
  RunConfig c;
  for (const auto& [k, v] : overrides) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
    else value = py::str(v).cast<std::string>();
    c.set(py::str(k).cast<std::string>(), value);
  }
  c.validate();
  return c;
}

py::dict metrics_dict(const MetricsRecord& m) {
  py::list rounds;
  for (const auto& r : m.rounds) {
    py::dict d;
    d["round"] = r.round;
    d["seconds"] = r.seconds;
    d["train_risk"] = r.train_risk;
    d["train_accuracy"] = r.train_accuracy;
    d["test_accuracy"] = r.test_accuracy;
    d["alpha"] = r.alpha;
    d["pixels"] = r.pixels;
    rounds.append(d);
  }
  py::dict out;
  out["name"] = m.name;
  out["method"] = to_string(m.method);
  out["basic_train_risk"] = m.basic_train_risk;
  out["basic_test_accuracy"] = m.basic_test_accuracy;
  out["final_accuracy"] = m.final_accuracy;
  out["total_seconds"] = m.total_seconds;
  out["warmup_epochs"] = m.warmup_epochs;
  out["total_epochs"] = m.total_epochs;
  out["rounds"] = rounds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core routines of the sgboost library";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<LabelError>(m, "LabelError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("multiclass_loss", [](const std::vector<double>& f, int label) { return multiclass_loss(f, label); },
        py::arg("scores"), py::arg("label"));
  m.def("risk", [](const Array& f, const std::vector<int>& z) { return risk(scores_2d(f), z); }, py::arg("scores"),
        py::arg("labels"));
  m.def("boost_weights",
        [](const Array& f, const std::vector<int>& z) { return to_array(compute_boost_weights(scores_2d(f), z).values); },
        py::arg("scores"), py::arg("labels"));
  m.def("functional_gradient",
        [](const Array& g, const Array& w) { return functional_gradient(scores_2d(g), BoostWeights{scores_2d(w)}); },
        py::arg("candidate"), py::arg("weights"));
  m.def("line_search",
        [](const Array& f, const Array& g, const std::vector<int>& z, double alpha_max, double tolerance) {
          return line_search(scores_2d(f), scores_2d(g), z, {alpha_max, tolerance});
        },
        py::arg("scores"), py::arg("candidate"), py::arg("labels"), py::arg("alpha_max") = 10.0,
        py::arg("tolerance") = 1e-6);

  m.def("kept_count", &kept_count, py::arg("fraction"), py::arg("extent"));
  m.def("row_col_scores",
        [](const Array& map) {
          const auto s = row_col_scores(to_map(map));
          return py::make_tuple(s.rows, s.cols);
        },
        py::arg("importance"));
  m.def("select_subgrid",
        [](const Array& map, double kr, double kc) {
          const auto s = select_subgrid(to_map(map), kr, kc);
          return py::make_tuple(s.rows, s.cols);
        },
        py::arg("importance"), py::arg("keep_rows") = 0.9, py::arg("keep_cols") = 0.9);

  m.def("make_synthetic",
        [](std::uint64_t seed, std::size_t n, std::size_t channels, std::size_t height, std::size_t width,
           std::size_t classes, double difficulty) {
          const LabeledBatch b = make_synthetic(seed, n, {channels, height, width}, classes, difficulty);
          return py::make_tuple(to_array(b.inputs), py::array_t<int>(py::ssize_t(b.labels.size()), b.labels.data()));
        },
        py::arg("seed"), py::arg("n"), py::arg("channels") = 1, py::arg("height") = 16, py::arg("width") = 16,
        py::arg("classes") = 4, py::arg("difficulty") = 0.5);

  py::class_<BoostEnsemble>(m, "Ensemble")
      .def_property_readonly("stages", [](const BoostEnsemble& e) { return e.stages.size(); })
      .def_property_readonly("classes", [](const BoostEnsemble& e) { return e.classes; })
      .def_property_readonly("shrinkage", [](const BoostEnsemble& e) { return e.shrinkage; })
      .def_property_readonly("geometry", [](const BoostEnsemble& e) { return e.geometry(); })
      .def_property_readonly("alphas",
                             [](const BoostEnsemble& e) {
                               std::vector<double> a;
                               for (const auto& s : e.stages) a.push_back(s.alpha);
                               return a;
                             })
      .def("predict", [](const BoostEnsemble& e, const Array& x) { return to_array(ensemble_predict(e, to_tensor(x))); },
           py::arg("inputs"))
      .def("save", [](const BoostEnsemble& e, const std::filesystem::path& p) { save_checkpoint(e, p); },
           py::arg("path"))
      .def("to_bytes", [](const BoostEnsemble& e) {
        const auto b = encode_checkpoint(e);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("config_defaults", [] { return config_entries(RunConfig{}); });
  m.def("run_experiment",
        [](const py::dict& overrides) {
          const RunConfig c = config_from(overrides);
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(c);
          }
          py::dict out = metrics_dict(r.metrics);
          out["ensemble"] = py::cast(std::move(r.ensemble));
          if (!r.importance.values().empty()) out["importance"] = to_array(r.importance);
          return out;
        },
        py::arg("config") = py::dict());
}
