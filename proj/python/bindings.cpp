#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "trimodal/config.hpp"
#include "trimodal/errors.hpp"
#include "trimodal/eval.hpp"
#include "trimodal/gaussian.hpp"
#include "trimodal/gradsuite.hpp"
#include "trimodal/loss.hpp"
#include "trimodal/ply.hpp"
#include "trimodal/shard.hpp"
#include "trimodal/store.hpp"
#include "trimodal/trainer.hpp"

namespace py = pybind11;
using namespace trimodal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
    const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
    return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Embeddings to_rows(const Array& a) {
    const Tensor t = to_tensor(a);
    Embeddings out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        out[r].assign(t.values.begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
                      t.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols()));
    }
    return out;
}

Array from_rows(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    Array out({rows.size(), cols});
    auto* p = out.mutable_data();
    for (const auto& r : rows) p = std::copy(r.begin(), r.end(), p);
    return out;
}

// Cloud attributes as an n x 14 array: position, opacity, color, scale, rotation (wxyz).
Array cloud_array(const GaussianCloud& cloud) {
    std::vector<std::vector<double>> rows;
    for (const auto& g : cloud.gaussians) {
        std::vector<double> r(g.position.begin(), g.position.end());
        r.push_back(g.opacity);
        r.insert(r.end(), g.color.begin(), g.color.end());
        r.insert(r.end(), g.scale.begin(), g.scale.end());
        r.insert(r.end(), g.rotation.begin(), g.rotation.end());
        rows.push_back(std::move(r));
    }
    return from_rows(rows, 14);
}

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    for (const auto& [k, v] : m) d[py::str(k)] = v;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian-splat, image and text embedding alignment.";

    py::register_exception<Error>(m, "Error");
    py::register_exception<DimensionError>(m, "DimensionError", m.attr("Error"));
    py::register_exception<ContractError>(m, "ContractError", m.attr("Error"));
    py::register_exception<FormatError>(m, "FormatError", m.attr("Error"));
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", m.attr("Error"));
    py::register_exception<NumericError>(m, "NumericError", m.attr("Error"));
    py::register_exception<LookupError>(m, "LookupError", m.attr("Error"));

    py::enum_<Modality>(m, "Modality")
        .value("text", Modality::text)
        .value("image", Modality::image)
        .value("view", Modality::view)
        .value("g3d_image_space", Modality::g3d_image_space)
        .value("g3d_text_space", Modality::g3d_text_space)
        .value("teacher", Modality::teacher);

    py::class_<EmbeddingRecord>(m, "EmbeddingRecord")
        .def_readonly("id", &EmbeddingRecord::id)
        .def_readonly("modality", &EmbeddingRecord::modality)
        .def_readonly("angle", &EmbeddingRecord::angle)
        .def_property_readonly("values", [](const EmbeddingRecord& r) { return from_rows({r.values}, r.values.size()); })
        .def("__repr__", [](const EmbeddingRecord& r) {
            return "<EmbeddingRecord " + r.id + " " + modality_name(r.modality) + ">";
        });

    py::class_<Hit>(m, "Hit")
        .def_readonly("id", &Hit::id)
        .def_readonly("score", &Hit::score)
        .def_readonly("index", &Hit::index)
        .def("__repr__", [](const Hit& h) { return "<Hit " + h.id + " " + std::to_string(h.score) + ">"; });

    py::class_<EmbeddingStore>(m, "EmbeddingStore")
        .def(py::init<std::uint32_t>(), py::arg("dim"))
        .def_property_readonly("dim", &EmbeddingStore::dim)
        .def("__len__", &EmbeddingStore::size)
        .def(
            "add",
            [](EmbeddingStore& s, const std::string& id, Modality mod, const std::vector<double>& values,
               std::optional<float> angle) { s.add(id, mod, values, angle); },
            py::arg("id"), py::arg("modality"), py::arg("values"), py::arg("angle") = py::none())
        .def("records", &EmbeddingStore::records, py::return_value_policy::reference_internal)
        .def(
            "topk",
            [](const EmbeddingStore& s, const std::vector<double>& q, std::size_t k, std::optional<Modality> f) {
                return cosine_index_topk(s, q, k, f);
            },
            py::arg("query"), py::arg("k"), py::arg("modality") = py::none())
        .def("to_bytes", [](const EmbeddingStore& s) {
            const auto b = serialize_store(s);
            return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
        })
        .def_static("from_bytes", [](const py::bytes& b) {
            const std::string s = b;
            return deserialize_store(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        })
        .def("__eq__", &EmbeddingStore::operator==);

    m.def("save_store", &save_store, py::arg("store"), py::arg("path"));
    m.def("load_store", &load_store, py::arg("path"), py::arg("expected_dim") = py::none());

    m.def(
        "read_ply",
        [](const std::filesystem::path& path) {
            std::vector<std::string> warnings;
            return py::make_tuple(cloud_array(activate(read_ply(path, &warnings))), warnings);
        },
        py::arg("path"), "Activated Gaussians of a 3DGS PLY as an n x 14 array, plus parser warnings.");
    m.def(
        "load_shard",
        [](const std::filesystem::path& path) {
            py::dict out;
            for (const auto& o : load_shard(path)) out[py::str(o.id)] = cloud_array(o.cloud);
            return out;
        },
        py::arg("path"));

    m.def(
        "info_nce",
        [](const Array& a, const Array& b, double tau, bool symmetric) {
            Tape t;
            return info_nce(t.constant(to_tensor(a)), t.constant(to_tensor(b)), tau, symmetric).item();
        },
        py::arg("a"), py::arg("b"), py::arg("tau"), py::arg("symmetric") = true);

    m.def(
        "zero_shot_classify",
        [](const Array& objects, const Array& classes, std::size_t k) {
            return zero_shot_classify(to_rows(objects), to_rows(classes), k);
        },
        py::arg("objects"), py::arg("class_text"), py::arg("k") = 5);
    m.def(
        "few_shot_linear_probe",
        [](const Array& emb, const std::vector<std::size_t>& labels, const std::vector<std::size_t>& shots,
           std::uint64_t seed, std::size_t repeats) {
            ProbeOptions opt;
            opt.repeats = repeats;
            py::dict out;
            for (const auto& r : few_shot_linear_probe(to_rows(emb), labels, shots, seed, opt)) {
                out[py::int_(r.shots)] = r.mean_accuracy;
            }
            return out;
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("shots"), py::arg("seed") = 0, py::arg("repeats") = 10);
    m.def(
        "similarity_matrix",
        [](const Array& a, const Array& b) {
            const auto ra = to_rows(a), rb = to_rows(b);
            const std::vector<std::string> ia(ra.size()), ib(rb.size());
            const auto sm = similarity_matrix(ia, ra, ib, rb);
            Array out({ra.size(), rb.size()});
            std::copy(sm.values.begin(), sm.values.end(), out.mutable_data());
            return out;
        },
        py::arg("a"), py::arg("b"));

    m.def("toy_config_text", [] { return config_to_text(toy_config()); });
    m.def(
        "train",
        [](const std::string& config_text) {
            TrainConfig cfg = parse_config(config_text, toy_config());
            cfg.validate();
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(cfg);
            }
            py::list log;
            for (const auto& row : r.log) {
                py::dict d;
                d["step"] = row.step;
                d["loss"] = row.loss;
                d["loss_text"] = row.loss_text;
                d["loss_image"] = row.loss_image;
                d["tau"] = row.tau;
                log.append(d);
            }
            return log;
        },
        py::arg("config_text"), "Train from `key = value` text layered over the toy config; returns the loss log.");

    m.def(
        "gradient_suite",
        [](std::uint64_t seed, std::size_t coordinates) {
            GradSuiteOptions opt;
            opt.coordinates = coordinates;
            py::dict out;
            for (const auto& r : run_gradient_suite(seed, opt)) out[py::str(r.name)] = r.max_rel_error;
            return out;
        },
        py::arg("seed") = 0, py::arg("coordinates") = 120);

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "trimodal");
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a command-line invocation; returns (exit code, stdout, stderr).");

    m.def("metrics_from_csv", [](const std::string& text) { return metrics_dict(parse_metrics_csv(text)); });
}
