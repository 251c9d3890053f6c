// Python bindings for the core pipeline operations. Containers cross the
// boundary as plain lists/tuples; heavy training stays on the C++ side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "m3r/aligner.hpp"
#include "m3r/common.hpp"
#include "m3r/evalkit.hpp"
#include "m3r/nn/train.hpp"
#include "m3r/stationproc.hpp"

namespace py = pybind11;
using namespace m3r;

namespace {

py::dict metrics_to_dict(const evalkit::MetricReport& rep) {
  py::dict d;
  d["rmse"] = rep.rmse;
  d["mae"] = rep.mae;
  d["r2"] = rep.r2;
  d["cc"] = rep.cc;
  py::dict csi;
  for (std::size_t i = 0; i < rep.thresholds.size(); ++i)
    csi[py::float_(rep.thresholds[i])] = rep.csi[i];
  d["csi"] = csi;
  d["flags"] = rep.flags;
  return d;
}

// Checkpoint wrapper: loads once, then scores datasets or single sequences.
class Predictor {
 public:
  explicit Predictor(const std::string& path) : loaded_(nn::load_checkpoint(path)) {}

  py::dict config() const {
    const auto& c = loaded_.model.config();
    py::dict d;
    d["t_in"] = c.t_in;
    d["height"] = c.height;
    d["width"] = c.width;
    d["d_model"] = c.d_model;
    d["horizon"] = c.horizon;
    d["variant"] = nn::variant_name(c.variant);
    d["parameters"] = loaded_.model.params().scalar_count();
    return d;
  }

  py::dict evaluate(const std::string& dataset_path, const std::string& split) {
    const auto data = aligner::read_m3rd(dataset_path);
    const auto& seqs = split == "train" ? data.train : data.test;
    if (split != "train" && split != "test")
      throw ConfigError("split must be 'train' or 'test'");
    if (seqs.empty()) throw EmptyDataset("selected split is empty");
    const auto arrays = nn::predict_sequences(loaded_.model, loaded_.standardizer,
                                              seqs, data.frame_ny, data.frame_nx);
    py::dict d;
    d["pred"] = arrays.pred;
    d["target"] = arrays.target;
    d["persistence"] = arrays.persistence;
    d["metrics"] = metrics_to_dict(evalkit::compute_metrics(arrays.pred, arrays.target));
    return d;
  }

 private:
  nn::LoadedModel loaded_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "radar + weather-station rainfall nowcasting core";

  py::register_exception<Error>(m, "PipelineError", PyExc_RuntimeError);

  m.def("quantize", &aligner::quantize, py::arg("z_dbz"),
        "Reflectivity (dBZ, NaN for missing) to its storage code.");
  m.def(
      "dequantize",
      [](std::uint8_t code) {
        const auto [value, missing] = aligner::dequantize(code);
        return std::make_pair(value, !missing);
      },
      py::arg("code"),
      "Storage code to (normalized reflectivity, is_valid); the missing "
      "code yields (0.0, False).");
  m.def("zr_rainfall", &evalkit::zr_rainfall, py::arg("z_dbz"),
        py::arg("a") = 200.0, py::arg("b") = 1.6,
        "Reflectivity (dBZ) to rain rate (mm/hr).");
  m.def("spline_fill", &stationproc::spline_fill, py::arg("timestamps"),
        py::arg("values"),
        "Natural cubic spline over the non-missing knots; NaN entries are "
        "replaced, ends extend as constants.");
  m.def("wind_decompose", &stationproc::wind_decompose, py::arg("speed_mph"),
        py::arg("dir_deg"), "Speed/meteorological direction to (u, v).");
  m.def("wind_reconstitute", &stationproc::wind_reconstitute, py::arg("u_mph"),
        py::arg("v_mph"), "(u, v) back to (speed, direction in [0, 360)).");
  m.def("fill_precip", &stationproc::fill_precip, py::arg("timestamps"),
        py::arg("values"), py::arg("window_hours") = 2.5,
        "Contextual precipitation fill: interpolate inside active windows, "
        "zero otherwise.");
  m.def(
      "compute_metrics",
      [](const std::vector<double>& pred, const std::vector<double>& target,
         const std::vector<double>& thresholds) {
        return metrics_to_dict(evalkit::compute_metrics(pred, target, thresholds));
      },
      py::arg("pred"), py::arg("target"),
      py::arg("thresholds") = std::vector<double>(evalkit::kDefaultThresholds.begin(),
                                                  evalkit::kDefaultThresholds.end()),
      "RMSE, MAE, R^2, correlation and CSI at the given thresholds.");
  m.def(
      "dataset_summary",
      [](const std::string& path) {
        const auto data = aligner::read_m3rd(path);
        py::dict d;
        d["train"] = data.train.size();
        d["test"] = data.test.size();
        d["frame_ny"] = data.frame_ny;
        d["frame_nx"] = data.frame_nx;
        return d;
      },
      py::arg("path"), "Split sizes and frame geometry of a stored dataset.");

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
      .def("config", &Predictor::config)
      .def("evaluate", &Predictor::evaluate, py::arg("dataset_path"),
           py::arg("split") = "test");
}
