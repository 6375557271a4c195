// Python bindings for the core operations: synthetic data generation,
// training, inference, metrics and the optical-flow baseline.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nvgan/config.hpp"
#include "nvgan/flow.hpp"

namespace py = pybind11;
using namespace nvgan;

namespace {

Grid grid_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    Shape shape;
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape.push_back(arr.shape(i));
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return Grid(std::move(shape), std::move(data));
}

py::array_t<float> array_from_grid(const Grid& g) {
    std::vector<py::ssize_t> shape(g.shape.begin(), g.shape.end());
    py::array_t<float> arr(shape);
    std::copy(g.data.begin(), g.data.end(), arr.mutable_data());
    return arr;
}

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image image_from_array(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) {
        throw ShapeError("expected an HxWx3 uint8 image");
    }
    Image img(arr.shape(0), arr.shape(1));
    std::copy(arr.data(), arr.data() + arr.size(), img.rgb.begin());
    return img;
}

py::dict report_to_dict(const MetricsReport& r) {
    py::dict d;
    d["mae"] = r.mae;
    d["rmse"] = r.rmse;
    d["psnr"] = r.psnr;
    d["ssim"] = r.ssim;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "conditional-GAN night visible-satellite-imagery synthesis core";

    py::register_exception<ShapeError>(m, "ShapeError");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<CheckpointError>(m, "CheckpointError");
    py::register_exception<StateError>(m, "StateError");

    // ---- synthetic data ----
    m.def(
        "make_synthetic",
        [](const std::string& out_dir, int64_t samples, int64_t rows, int64_t cols,
           uint64_t seed) {
            SynthConfig cfg;
            cfg.samples = samples;
            cfg.rows = rows;
            cfg.cols = cols;
            cfg.seed = seed;
            const SynthScene scene = synth_scene(cfg);
            write_synthetic_dataset(scene, out_dir);
            return (std::filesystem::path(out_dir) / "manifest.json").string();
        },
        py::arg("out_dir"), py::arg("samples") = 200, py::arg("rows") = 64, py::arg("cols") = 64,
        py::arg("seed") = 1, "Generate a synthetic dataset and return the manifest path.");

    // ---- training / inference session ----
    py::class_<TrainSession>(m, "Session")
        .def_property_readonly("epoch", [](const TrainSession& s) { return s.epoch; })
        .def_property_readonly("channels", [](const TrainSession& s) {
            py::list names;
            for (const auto& spec : s.channels) names.append(spec.name);
            return names;
        });

    m.def(
        "create_session",
        [](const std::string& manifest_path, int depth, std::vector<int64_t> filters,
           uint64_t seed, int batch, const std::string& ablate, float lambda1, float lambda2) {
            const DatasetManifest manifest = load_manifest(manifest_path);
            GeneratorConfig gen;
            gen.depth = depth;
            gen.encoder_filters = std::move(filters);
            TrainConfig tcfg;
            tcfg.seed = seed;
            tcfg.batch = batch;
            tcfg.ablate = ablation_from_string(ablate);
            LossConfig loss{lambda1, lambda2};
            return session_for_manifest(manifest, gen, loss, AdamConfig{}, tcfg);
        },
        py::arg("manifest"), py::arg("depth") = 5,
        py::arg("filters") = std::vector<int64_t>{32, 64, 128, 256, 256}, py::arg("seed") = 1,
        py::arg("batch") = 8, py::arg("ablate") = "combined", py::arg("lambda1") = 1.0f,
        py::arg("lambda2") = 100.0f);

    m.def(
        "train_epochs",
        [](TrainSession& session, const std::string& manifest_path, int epochs) {
            const DatasetManifest manifest = load_manifest(manifest_path);
            std::vector<Sample> all;
            for (int64_t i = 0; i < static_cast<int64_t>(manifest.samples.size()); ++i) {
                all.push_back(load_sample(manifest, i));
            }
            const auto train_set = training_split(session, all);
            py::list stats;
            for (int e = 0; e < epochs; ++e) {
                const EpochStats st = train_epoch(session, train_set);
                py::dict d;
                d["epoch"] = session.epoch;
                d["d_loss"] = st.d_loss;
                d["g_loss"] = st.g_loss;
                d["l1"] = st.l1;
                stats.append(d);
            }
            return stats;
        },
        py::arg("session"), py::arg("manifest"), py::arg("epochs") = 1);

    m.def(
        "synthesize",
        [](TrainSession& session, const std::string& manifest_path, int64_t index) {
            const DatasetManifest manifest = load_manifest(manifest_path);
            return array_from_grid(synthesize(session, load_sample(manifest, index)));
        },
        py::arg("session"), py::arg("manifest"), py::arg("index"),
        "Deterministic inference; returns a 3xHxW albedo array.");

    m.def("save_checkpoint",
          [](TrainSession& s, const std::string& path) { save_checkpoint(s, path); });
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });

    m.def(
        "attention_report",
        [](TrainSession& session) {
            std::vector<ChannelLabel> labels;
            for (const auto& spec : session.channels) {
                labels.push_back({spec.name, to_string(spec.category)});
            }
            const AttentionReport report = attention_weights(session.g, labels);
            py::list rows;
            for (const auto& entry : report.channels) {
                py::dict d;
                d["name"] = entry.name;
                d["category"] = entry.category;
                d["weight"] = entry.weight;
                rows.append(d);
            }
            return rows;
        },
        py::arg("session"), "Per-channel SE weights from the most recent forward pass.");

    // ---- metrics ----
    m.def(
        "mae", [](const FloatArray& a, const FloatArray& b) {
            return mae(grid_from_array(a), grid_from_array(b));
        },
        py::arg("I"), py::arg("K"));
    m.def(
        "rmse", [](const FloatArray& a, const FloatArray& b) {
            return rmse(grid_from_array(a), grid_from_array(b));
        },
        py::arg("I"), py::arg("K"));
    m.def(
        "psnr",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b) {
            return psnr(image_from_array(a), image_from_array(b));
        },
        py::arg("I"), py::arg("K"), "PSNR on HxWx3 uint8 images; inf when identical.");
    m.def(
        "ssim",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b, int window,
           int stride) {
            SsimConfig cfg;
            cfg.window = window;
            cfg.stride = stride;
            return ssim(image_from_array(a), image_from_array(b), cfg);
        },
        py::arg("I"), py::arg("K"), py::arg("window") = 8, py::arg("stride") = 4);
    m.def(
        "evaluate_albedo",
        [](const FloatArray& y_true, const FloatArray& y_synth) {
            return report_to_dict(evaluate(grid_from_array(y_true), grid_from_array(y_synth)));
        },
        py::arg("y_true"), py::arg("y_synth"),
        "MAE/RMSE on albedo grids, PSNR/SSIM on rendered 8-bit images.");

    // ---- optical flow ----
    m.def(
        "estimate_flow",
        [](const FloatArray& f0, const FloatArray& f1) {
            const FlowField field = estimate_flow(grid_from_array(f0), grid_from_array(f1));
            return py::make_tuple(array_from_grid(field.u), array_from_grid(field.v));
        },
        py::arg("frame_t0"), py::arg("frame_t1"),
        "Dense flow (u, v) in pixels per step; u moves columns, v rows.");
    m.def(
        "extrapolate",
        [](const FloatArray& frame, const FloatArray& u, const FloatArray& v, int steps) {
            FlowField field{grid_from_array(u), grid_from_array(v)};
            return array_from_grid(extrapolate(grid_from_array(frame), field, steps));
        },
        py::arg("frame"), py::arg("u"), py::arg("v"), py::arg("steps") = 1);

    m.def("albedo_to_image", [](const FloatArray& albedo) {
        const Image img = albedo_to_image(grid_from_array(albedo));
        py::array_t<uint8_t> arr({img.rows, img.cols, int64_t{3}});
        std::copy(img.rgb.begin(), img.rgb.end(), arr.mutable_data());
        return arr;
    });
}
