#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "statenet/augment.hpp"
#include "statenet/dataset.hpp"
#include "statenet/errors.hpp"
#include "statenet/evaluation.hpp"
#include "statenet/model.hpp"
#include "statenet/optim.hpp"
#include "statenet/synthetic.hpp"
#include "statenet/training.hpp"

namespace py = pybind11;
using namespace statenet;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_numpy(const Tensor& t) {
  py::array_t<float> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_statenet, m) {
  m.doc() = "Cooking-state image classifier engine";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", data.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::enum_<DecayBoundary>(m, "DecayBoundary")
      .value("AFTER_FIXED", DecayBoundary::AfterFixed)
      .value("END_OF_INTERVAL", DecayBoundary::EndOfInterval);

  py::class_<LrSchedule>(m, "LrSchedule")
      .def(py::init<>())
      .def_readwrite("base_lr", &LrSchedule::base_lr)
      .def_readwrite("fixed_epochs", &LrSchedule::fixed_epochs)
      .def_readwrite("decay_interval", &LrSchedule::decay_interval)
      .def_readwrite("decay_factor", &LrSchedule::decay_factor)
      .def_readwrite("boundary", &LrSchedule::boundary);

  m.def("lr_at_epoch", &lr_at_epoch, py::arg("schedule"), py::arg("epoch"));

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("input_size", &ModelConfig::input_size)
      .def_readwrite("in_channels", &ModelConfig::in_channels)
      .def_readwrite("conv_widths", &ModelConfig::conv_widths)
      .def_readwrite("fc_hidden", &ModelConfig::fc_hidden)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("dropout_factor", &ModelConfig::dropout_factor)
      .def("validate", &ModelConfig::validate);

  py::class_<NormStats>(m, "NormStats")
      .def(py::init<>())
      .def_readwrite("mean", &NormStats::mean)
      .def_readwrite("stddev", &NormStats::stddev);

  py::class_<Model>(m, "Model")
      .def(py::init([](const ModelConfig& cfg, std::uint64_t seed) { return build_statenet(cfg, seed); }),
           py::arg("config") = ModelConfig{}, py::arg("seed") = 42)
      .def_property_readonly("config", &Model::config)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("zero_weights", &Model::zero_weights)
      .def("summary", [](const Model& self) { return model_summary(self).render(); })
      .def("spatial_trace", [](const Model& self) { return model_summary(self).spatial_trace; })
      .def("logits", [](const Model& self, const FloatArray& x) { return to_numpy(self.infer_logits(to_tensor(x))); })
      .def("predict_proba",
           [](const Model& self, const FloatArray& x) { return to_numpy(self.predict_proba(to_tensor(x))); });

  py::class_<CheckpointMeta>(m, "CheckpointMeta")
      .def(py::init<>())
      .def_readwrite("epoch", &CheckpointMeta::epoch)
      .def_readwrite("seed", &CheckpointMeta::seed)
      .def_readwrite("class_names", &CheckpointMeta::class_names)
      .def_readwrite("norm", &CheckpointMeta::norm);

  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("meta"), py::arg("path"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        auto ck = load_checkpoint(path);
        return py::make_tuple(std::move(ck.model), ck.meta);
      },
      py::arg("path"));

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def("__len__", &LabeledDataset::size)
      .def_readonly("split", &LabeledDataset::split)
      .def_property_readonly("class_names", [](const LabeledDataset& d) { return d.labels.names(); })
      .def_property_readonly("labels",
                             [](const LabeledDataset& d) {
                               std::vector<std::size_t> out;
                               for (const auto& s : d.samples) out.push_back(s.label);
                               return out;
                             })
      .def("image", [](const LabeledDataset& d, std::size_t i) { return to_numpy(d.samples.at(i).image); })
      .def("class_frequencies", [](const LabeledDataset& d) { return class_frequencies(d); });

  m.def("load_dataset_dir", &load_dataset_dir, py::arg("root"), py::arg("split"), py::arg("size") = 64);
  m.def("write_dataset_dir", &write_dataset_dir, py::arg("dataset"), py::arg("root"));
  m.def("pack_dataset", &pack_dataset, py::arg("dataset"), py::arg("path"));
  m.def("unpack_dataset", &unpack_dataset, py::arg("path"), py::arg("split") = "packed");
  m.def("make_blob_dataset", &make_blob_dataset, py::arg("num_classes"), py::arg("per_class"),
        py::arg("image_size") = 64, py::arg("seed") = 0, py::arg("split") = "train");
  m.def("load_ppm", [](const std::filesystem::path& p) { return to_numpy(load_ppm(p)); }, py::arg("path"));
  m.def("write_ppm", [](const FloatArray& img, const std::filesystem::path& p) { write_ppm(to_tensor(img), p); },
        py::arg("image"), py::arg("path"));

  py::class_<AugmentPolicy>(m, "AugmentPolicy")
      .def(py::init<>())
      .def_static("identity", &AugmentPolicy::identity)
      .def_readwrite("max_rotation_degrees", &AugmentPolicy::max_rotation_degrees)
      .def_readwrite("max_shift_fraction", &AugmentPolicy::max_shift_fraction)
      .def_readwrite("crop_padding", &AugmentPolicy::crop_padding)
      .def_readwrite("flip_probability", &AugmentPolicy::flip_probability)
      .def_readwrite("rotate", &AugmentPolicy::rotate)
      .def_readwrite("shift", &AugmentPolicy::shift)
      .def_readwrite("crop", &AugmentPolicy::crop)
      .def_readwrite("flip", &AugmentPolicy::flip);
  m.def(
      "augment",
      [](const FloatArray& img, const AugmentPolicy& policy, std::uint64_t seed) {
        Rng rng(seed);
        return to_numpy(apply_augmentation(to_tensor(img), policy, rng));
      },
      py::arg("image"), py::arg("policy") = AugmentPolicy{}, py::arg("seed") = 0);

  m.def("argmax", [](const std::vector<double>& v) { return argmax(v); });
  m.def(
      "ensemble_sum_softmax",
      [](const std::vector<ProbVector>& members) {
        const auto out = ensemble_sum_softmax(members);
        return py::make_tuple(out.summed, out.predicted);
      },
      py::arg("members"));
  m.def("ensemble_majority_vote", [](const std::vector<std::size_t>& p) { return ensemble_majority_vote(p); },
        py::arg("predictions"));
  m.def(
      "confusion_matrix",
      [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred, std::size_t k) {
        const auto cm = confusion_matrix(truth, pred, k);
        std::vector<std::vector<std::uint64_t>> rows(k, std::vector<std::uint64_t>(k));
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) rows[i][j] = cm.at(i, j);
        return rows;
      },
      py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));

  m.def(
      "evaluate",
      [](const Model& model, const LabeledDataset& ds, const NormStats& norm, std::size_t batch) {
        const auto r = evaluate_split(model, ds, norm, batch);
        return py::make_tuple(r.accuracy, r.loss);
      },
      py::arg("model"), py::arg("dataset"), py::arg("norm") = NormStats{}, py::arg("batch_size") = 64);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a statenet subcommand in-process; returns (exit_code, stdout, stderr).");
}
