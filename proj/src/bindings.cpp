// Python face of the library. Favors plain dicts/arrays over mirroring every
// C++ struct; the heavyweight entry point is run_experiment(config).

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>

#include "tad/config.hpp"
#include "tad/dataset.hpp"
#include "tad/diversion.hpp"
#include "tad/harness.hpp"
#include "tad/model.hpp"
#include "tad/synthetic.hpp"

namespace py = pybind11;
using namespace tad;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
    const auto dumped = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(dumped);
}

NoiseKind parse_kind(const std::string& kind) {
    if (kind == "symmetric") return NoiseKind::symmetric;
    if (kind == "asymmetric") return NoiseKind::asymmetric;
    throw py::value_error("kind must be 'symmetric' or 'asymmetric'");
}

py::dict result_to_dict(const TadResult& res, const nlohmann::json& echo) {
    py::dict out;
    out["mode"] = res.baseline ? "baseline" : "tad";
    out["config"] = json_to_py(echo);
    out["rounds_run"] = res.history.size();
    out["trusted_count"] = res.final_partition.trusted_idx.size();
    out["trusted_fraction"] =
        res.final_partition.size() == 0
            ? 0.0
            : static_cast<double>(res.final_partition.trusted_idx.size()) / res.final_partition.size();
    out["synthetic_features"] = res.synthetic.features;
    out["synthetic_labels"] = res.synthetic.labels;

    py::list history;
    for (const RoundRecord& r : res.history) {
        py::dict row;
        row["round"] = r.round;
        row["trusted_count"] = r.trusted_count;
        row["promotions"] = r.promotions;
        row["demotions"] = r.demotions;
        row["gmm_mu1"] = r.gmm_mu1;
        row["gmm_mu2"] = r.gmm_mu2;
        row["precision"] = r.precision;
        row["recall"] = r.recall;
        row["f1"] = r.f1;
        history.append(row);
    }
    out["history"] = history;

    if (res.eval) {
        out["accuracies"] = res.eval->accuracies;
        out["accuracy_mean"] = res.eval->mean;
        out["accuracy_std"] = res.eval->stddev;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_tad, m) {
    m.doc() = "Trust-aware dataset distillation under noisy labels (C++ core)";
    m.attr("__version__") = "0.1.0";

    py::class_<GmmFit>(m, "GmmFit")
        .def_readonly("pi", &GmmFit::pi)
        .def_readonly("mu", &GmmFit::mu)
        .def_readonly("sigma2", &GmmFit::sigma2)
        .def_readonly("trusted_component", &GmmFit::trusted_component)
        .def_readonly("loglik_history", &GmmFit::loglik_history)
        .def_readonly("degenerate", &GmmFit::degenerate);

    py::class_<TrustPartition>(m, "TrustPartition")
        .def_readonly("confidences", &TrustPartition::confidences)
        .def_readonly("thresholds", &TrustPartition::thresholds)
        .def_readonly("trusted_idx", &TrustPartition::trusted_idx)
        .def_readonly("untrusted_idx", &TrustPartition::untrusted_idx)
        .def_readonly("working_labels", &TrustPartition::working_labels)
        .def("is_trusted", &TrustPartition::is_trusted, py::arg("i"))
        .def("__len__", &TrustPartition::size);

    m.def(
        "make_blobs",
        [](int num_classes, int samples_per_class, int dim, double class_center_scale,
           double within_class_stddev, std::uint64_t seed) {
            BlobSpec spec;
            spec.num_classes = num_classes;
            spec.samples_per_class = samples_per_class;
            spec.dim = dim;
            spec.class_center_scale = class_center_scale;
            spec.within_class_stddev = within_class_stddev;
            spec.seed = seed;
            LabeledDataset ds = make_blobs(spec);
            return py::make_tuple(std::move(ds.features), std::move(ds.labels));
        },
        py::arg("num_classes"), py::arg("samples_per_class"), py::arg("dim"),
        py::arg("class_center_scale") = 1.0, py::arg("within_class_stddev") = 1.0, py::arg("seed") = 0,
        "Gaussian blob dataset; returns (features, labels) laid out class by class.");

    m.def(
        "inject_noise",
        [](const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
           const std::string& kind, double ratio, const std::map<int, int>& class_map,
           std::uint64_t seed) {
            LabeledDataset ds{features, labels, num_classes};
            NoiseSpec spec;
            spec.kind = parse_kind(kind);
            spec.ratio = ratio;
            spec.class_map = class_map;
            spec.seed = seed;
            const NoisyDataset noisy = inject_noise(ds, spec);
            py::dict out;
            out["noisy_labels"] = noisy.base.labels;
            out["clean_labels"] = noisy.eval->clean_labels;
            out["flip_mask"] = noisy.eval->flip_mask;
            return out;
        },
        py::arg("features"), py::arg("labels"), py::arg("num_classes"), py::arg("kind") = "symmetric",
        py::arg("ratio") = 0.0, py::arg("class_map") = std::map<int, int>{}, py::arg("seed") = 0,
        "Label corruption; returns noisy labels plus the evaluation-only clean view.");

    m.def(
        "fit_gmm2",
        [](const std::vector<double>& losses, double tol, int max_iter) {
            return fit_gmm2(losses, tol, max_iter);
        },
        py::arg("losses"), py::arg("tol") = kGmmTol, py::arg("max_iter") = kGmmMaxIter,
        "Two-component 1-D Gaussian mixture over per-sample losses.");

    m.def("confidences", &confidences, py::arg("fit"), py::arg("losses"),
          "Posterior of the trusted (small-loss) component per sample.");

    m.def("class_thresholds", &class_thresholds, py::arg("confidences"), py::arg("labels"),
          py::arg("num_classes"), "Per-class mean confidence thresholds.");

    m.def("partition", &partition, py::arg("confidences"), py::arg("labels"), py::arg("thresholds"),
          "Trusted/untrusted split: sample i is trusted iff w_i >= threshold of its label.");

    m.def(
        "evaluate_synthetic",
        [](const Eigen::MatrixXd& features, const std::vector<int>& labels, int ipc, int num_classes,
           const Eigen::MatrixXd& test_features, const std::vector<int>& test_labels, int epochs,
           int batch_size, double learning_rate, int repeats, std::uint64_t seed) {
            SyntheticSet syn{features, labels, ipc, num_classes};
            LabeledDataset test{test_features, test_labels, num_classes};
            TrainHyper hyper;
            hyper.epochs = epochs;
            hyper.batch_size = batch_size;
            hyper.learning_rate = learning_rate;
            hyper.seed = seed;
            const StudentEval ev = evaluate_student(syn, test, hyper, repeats);
            return py::make_tuple(ev.accuracies, ev.mean, ev.stddev);
        },
        py::arg("features"), py::arg("labels"), py::arg("ipc"), py::arg("num_classes"),
        py::arg("test_features"), py::arg("test_labels"), py::arg("epochs") = 10,
        py::arg("batch_size") = 32, py::arg("learning_rate") = 0.1, py::arg("repeats") = 5,
        py::arg("seed") = 0,
        "Trains fresh students on a synthetic set; returns (accuracies, mean, std).");

    m.def("default_config", []() { return json_to_py(tad::default_config()); },
          "The full experiment configuration document with every key at its default.");

    m.def(
        "run_experiment",
        [](const py::object& config, std::optional<std::uint64_t> seed) {
            nlohmann::json doc = config.is_none() ? tad::default_config() : py_to_json(config);
            if (seed) doc["seed"] = *seed;
            const ExperimentConfig cfg = parse_config(doc);
            const LabeledDataset blobs = make_blobs(cfg.data);
            const auto split = split_train_test(blobs, cfg.train_per_class, cfg.test_per_class);
            const NoisyDataset noisy = inject_noise(split.first, cfg.noise);
            const TadResult res = run_dual_loop(noisy, cfg.loop, &split.second);
            return result_to_dict(res, cfg.echo);
        },
        py::arg("config") = py::none(), py::arg("seed") = py::none(),
        "Full pipeline from a config dict (default_config() when omitted): dataset, noise, "
        "dual loop, student evaluation. Returns a result dict.");
}
