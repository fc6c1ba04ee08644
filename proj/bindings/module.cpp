// Python bindings for the dxann core: dataset generation, training,
// prediction, explanation, and checkpoint I/O.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dxann/classifier.hpp"
#include "dxann/data.hpp"
#include "dxann/heatmap.hpp"
#include "dxann/train.hpp"

namespace py = pybind11;
using namespace dxann;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style |
                                                       py::array::forcecast>& a) {
    if (a.ndim() != 1)
        throw std::invalid_argument("expected a 1-D float array");
    Tensor t({std::size_t(a.shape(0))});
    const double* src = a.data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = src[i];
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    py::array_t<double> out(std::vector<py::ssize_t>{py::ssize_t(t.size())});
    double* dst = out.mutable_data();
    for (std::size_t i = 0; i < t.size(); ++i) dst[i] = t[i];
    return out;
}

py::array_t<std::uint8_t> array_from_rgb(const RgbImage& img) {
    py::array_t<std::uint8_t> out({py::ssize_t(img.height), py::ssize_t(img.width),
                                   py::ssize_t(3)});
    std::uint8_t* dst = out.mutable_data();
    for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = img.pixels[i];
    return out;
}

TrainConfig config_from_kwargs(double learning_rate, std::size_t epochs,
                               std::size_t batch_size, std::uint64_t seed,
                               std::size_t blocks, double alpha, double separation,
                               const std::string& conditioner,
                               const std::vector<std::size_t>& widths,
                               std::size_t kernel, bool dequantize,
                               double grad_clip) {
    TrainConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.blocks = blocks;
    cfg.alpha = alpha;
    cfg.separation = separation;
    if (conditioner == "mlp")
        cfg.conditioner.kind = ConditionerKind::Mlp;
    else if (conditioner == "cnn")
        cfg.conditioner.kind = ConditionerKind::Cnn;
    else
        throw std::invalid_argument("conditioner must be 'mlp' or 'cnn'");
    cfg.conditioner.widths = widths;
    cfg.conditioner.kernel = kernel;
    cfg.dequantize = dequantize;
    cfg.grad_clip = grad_clip;
    return cfg;
}

// A trained classifier: flow, latent heads, and the config that built it.
struct Model {
    FlowModel flow;
    LatentHeads heads;
    TrainConfig config;
};

}  // namespace

PYBIND11_MODULE(_dxann, m) {
    m.doc() = "Flow-based binary classifier with per-feature explanations";

    py::class_<Sample>(m, "Sample")
        .def_property_readonly("id", [](const Sample& s) { return s.id; })
        .def_property_readonly("label", [](const Sample& s) { return s.label; })
        .def_property_readonly(
            "features", [](const Sample& s) { return array_from_tensor(s.features); })
        .def_property_readonly("truth_mask",
                               [](const Sample& s) -> py::object {
                                   if (!s.truth_mask) return py::none();
                                   return array_from_tensor(*s.truth_mask);
                               })
        .def("__repr__", [](const Sample& s) {
            return "Sample(id='" + s.id + "', label=" + std::to_string(s.label) + ")";
        });

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("samples",
                               [](const Dataset& d) { return d.samples; })
        .def_property_readonly("dim", [](const Dataset& d) { return d.dim; })
        .def_property_readonly("spatial",
                               [](const Dataset& d) -> py::object {
                                   if (!d.spatial) return py::none();
                                   return py::make_tuple(d.spatial->first,
                                                         d.spatial->second);
                               })
        .def("__len__", [](const Dataset& d) { return d.size(); })
        .def("__repr__", [](const Dataset& d) {
            return "Dataset(n=" + std::to_string(d.size()) +
                   ", dim=" + std::to_string(d.dim) + ")";
        });

    m.def("gen_two_moons", &gen_two_moons, py::arg("n"), py::arg("noise_sigma"),
          py::arg("seed"),
          "Two interleaved half-circles with Gaussian noise, one per class.");
    m.def("gen_blob_images", &gen_blob_images, py::arg("n"), py::arg("height"),
          py::arg("width"), py::arg("radius"), py::arg("amplitude"),
          py::arg("noise_sigma"), py::arg("seed"),
          "Noise images; class 1 carries a planted Gaussian bump with a truth mask.");
    m.def("split", &split, py::arg("dataset"), py::arg("train_fraction"),
          py::arg("seed"), "Seeded shuffle then prefix split into (train, test).");
    m.def("preprocess", &preprocess, py::arg("dataset"),
          py::arg("dequantize") = false, py::arg("seed") = 0,
          "Rescale [0,255] features to [0,1], optionally with dequantization noise.");
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("directory"));
    m.def("load_dataset", &load_dataset, py::arg("directory"));

    py::class_<Prediction>(m, "Prediction")
        .def_readonly("label", &Prediction::label)
        .def_readonly("logp0", &Prediction::logp0)
        .def_readonly("logp1", &Prediction::logp1)
        .def("__repr__", [](const Prediction& p) {
            return "Prediction(label=" + std::to_string(p.label) + ")";
        });

    py::class_<ECSMap>(m, "ECSMap")
        .def_property_readonly("raw",
                               [](const ECSMap& e) { return array_from_tensor(e.raw); })
        .def_property_readonly(
            "normalized", [](const ECSMap& e) { return array_from_tensor(e.normalized); })
        .def_readonly("label", &ECSMap::label)
        .def_property_readonly("spatial", [](const ECSMap& e) -> py::object {
            if (!e.spatial) return py::none();
            return py::make_tuple(e.spatial->first, e.spatial->second);
        });

    py::class_<EpochRecord>(m, "EpochRecord")
        .def_readonly("epoch", &EpochRecord::epoch)
        .def_readonly("train_loss", &EpochRecord::train_loss)
        .def_readonly("train_acc", &EpochRecord::train_acc)
        .def_readonly("test_acc", &EpochRecord::test_acc)
        .def_readonly("seconds", &EpochRecord::seconds);

    py::class_<Model>(m, "Model")
        .def_property_readonly("dim", [](const Model& m_) { return m_.flow.dim(); })
        .def_property_readonly("blocks",
                               [](const Model& m_) { return m_.flow.blocks().size(); })
        .def(
            "forward",
            [](const Model& m_, const py::array_t<double>& x) {
                auto [z, ld] = m_.flow.forward(tensor_from_array(x));
                return py::make_tuple(array_from_tensor(z), ld);
            },
            py::arg("x"), "Map input to latent space; returns (z, total_log_det).")
        .def(
            "inverse",
            [](const Model& m_, const py::array_t<double>& z) {
                return array_from_tensor(m_.flow.inverse(tensor_from_array(z)));
            },
            py::arg("z"))
        .def(
            "predict",
            [](const Model& m_, const py::array_t<double>& x) {
                return predict(tensor_from_array(x), m_.flow, m_.heads);
            },
            py::arg("x"))
        .def(
            "explain",
            [](const Model& m_, const py::array_t<double>& x) {
                return explain(tensor_from_array(x), m_.flow, m_.heads);
            },
            py::arg("x"),
            "Per-feature explanation scores |z - mu| against the predicted class.")
        .def(
            "evaluate",
            [](const Model& m_, const Dataset& ds) {
                Evaluation ev = evaluate(m_.flow, m_.heads, ds);
                py::dict out;
                out["accuracy"] = ev.accuracy;
                out["mean_loss"] = ev.mean_loss;
                out["confusion"] = py::make_tuple(
                    py::make_tuple(ev.confusion[0][0], ev.confusion[0][1]),
                    py::make_tuple(ev.confusion[1][0], ev.confusion[1][1]));
                return out;
            },
            py::arg("dataset"))
        .def(
            "save",
            [](const Model& m_, const std::string& path) {
                save_checkpoint(path, m_.flow, m_.heads, m_.config);
            },
            py::arg("path"));

    m.def(
        "train",
        [](const Dataset& train_set, const Dataset& test_set, double learning_rate,
           std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
           std::size_t blocks, double alpha, double separation,
           const std::string& conditioner, const std::vector<std::size_t>& widths,
           std::size_t kernel, bool dequantize, double grad_clip) {
            TrainConfig cfg = config_from_kwargs(
                learning_rate, epochs, batch_size, seed, blocks, alpha, separation,
                conditioner, widths, kernel, dequantize, grad_clip);
            TrainResult res = train(train_set, test_set, cfg);
            return py::make_tuple(
                Model{std::move(res.model), std::move(res.heads), cfg}, res.log);
        },
        py::arg("train_set"), py::arg("test_set"), py::kw_only(),
        py::arg("learning_rate") = 1e-3, py::arg("epochs") = 200,
        py::arg("batch_size") = 50, py::arg("seed") = 0, py::arg("blocks") = 4,
        py::arg("alpha") = 3.0, py::arg("separation") = 1.0,
        py::arg("conditioner") = "mlp",
        py::arg("widths") = std::vector<std::size_t>{64, 64}, py::arg("kernel") = 3,
        py::arg("dequantize") = false, py::arg("grad_clip") = 100.0,
        "Train a flow classifier; returns (Model, list of per-epoch records).");

    m.def(
        "load_model",
        [](const std::string& path) {
            Checkpoint ck = load_checkpoint(path);
            return Model{std::move(ck.model), std::move(ck.heads), ck.config};
        },
        py::arg("path"));

    m.def(
        "render_heatmap",
        [](const py::array_t<double>& normalized, std::size_t h, std::size_t w) {
            return array_from_rgb(render_heatmap(tensor_from_array(normalized), h, w));
        },
        py::arg("normalized"), py::arg("height"), py::arg("width"),
        "Colormapped scores as an (H, W, 3) uint8 array.");
    m.def(
        "render_overlay",
        [](const py::array_t<double>& normalized,
           const py::array_t<std::uint8_t, py::array::c_style>& gray, double alpha) {
            if (gray.ndim() != 2)
                throw std::invalid_argument("expected a 2-D uint8 grayscale array");
            GrayImage img;
            img.height = std::size_t(gray.shape(0));
            img.width = std::size_t(gray.shape(1));
            img.pixels.assign(gray.data(), gray.data() + img.height * img.width);
            return array_from_rgb(
                render_overlay(tensor_from_array(normalized), img, alpha));
        },
        py::arg("normalized"), py::arg("gray"), py::arg("alpha") = 0.5,
        "Alpha-blend the heatmap over a grayscale source image.");
}
