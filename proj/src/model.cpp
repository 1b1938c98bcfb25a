#include "tad/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Param layout (column-major blocks):
//   linear: W (C x D), b (C)
//   mlp:    W1 (H x D), b1 (H), W2 (C x H), b2 (C)
struct Blocks {
    Map<const MatrixXd> w1;
    Map<const VectorXd> b1;
    Map<const MatrixXd> w2;
    Map<const VectorXd> b2;
};

Blocks split(const ModelShape& s, const VectorXd& v) {
    const double* p = v.data();
    if (s.arch == Arch::linear) {
        // Single layer: expose it through the w2/b2 slots, w1 empty.
        return {Map<const MatrixXd>(p, 0, 0), Map<const VectorXd>(p, 0),
                Map<const MatrixXd>(p, s.num_classes, s.input_dim),
                Map<const VectorXd>(p + s.num_classes * s.input_dim, s.num_classes)};
    }
    const int h = s.hidden;
    const double* w1 = p;
    const double* b1 = w1 + h * s.input_dim;
    const double* w2 = b1 + h;
    const double* b2 = w2 + s.num_classes * h;
    return {Map<const MatrixXd>(w1, h, s.input_dim), Map<const VectorXd>(b1, h),
            Map<const MatrixXd>(w2, s.num_classes, h), Map<const VectorXd>(b2, s.num_classes)};
}

VectorXd softmax(const VectorXd& z) {
    const double m = z.maxCoeff();
    VectorXd e = (z.array() - m).exp();
    return e / e.sum();
}

void check_input(const ModelShape& s, const Eigen::VectorXd& x) {
    if (static_cast<int>(x.size()) != s.input_dim)
        throw ShapeError("input dim " + std::to_string(x.size()) + " != model dim " +
                         std::to_string(s.input_dim));
}

// dL/dlogits for CE (lambda=0) or the regularized objective.
VectorXd logit_residual(const VectorXd& probs, int label, double lambda, double A) {
    VectorXd r = probs;
    r(label) -= 1.0;
    if (lambda != 0.0) r *= 1.0 - lambda * A * probs(label);
    return r;
}

ParamVector backprop(const ParamVector& params, const Eigen::VectorXd& x, const VectorXd& dlogits) {
    const ModelShape& s = params.shape;
    ParamVector g;
    g.shape = s;
    g.values.setZero(params.values.size());
    if (s.arch == Arch::linear) {
        Map<MatrixXd> dw(g.values.data(), s.num_classes, s.input_dim);
        Map<VectorXd> db(g.values.data() + s.num_classes * s.input_dim, s.num_classes);
        dw = dlogits * x.transpose();
        db = dlogits;
        return g;
    }
    const auto b = split(s, params.values);
    const VectorXd hidden = (b.w1 * x + b.b1).array().tanh();
    const int h = s.hidden;
    Map<MatrixXd> dw1(g.values.data(), h, s.input_dim);
    Map<VectorXd> db1(g.values.data() + h * s.input_dim, h);
    Map<MatrixXd> dw2(g.values.data() + h * s.input_dim + h, s.num_classes, h);
    Map<VectorXd> db2(g.values.data() + h * s.input_dim + h + s.num_classes * h, s.num_classes);
    dw2 = dlogits * hidden.transpose();
    db2 = dlogits;
    const VectorXd dh = b.w2.transpose() * dlogits;
    const VectorXd dz1 = dh.array() * (1.0 - hidden.array().square());
    dw1 = dz1 * x.transpose();
    db1 = dz1;
    return g;
}

ParamVector objective_grad(const ParamVector& params, const Eigen::VectorXd& x, int label, double lambda,
                           double A) {
    const VectorXd probs = forward(params, x);
    return backprop(params, x, logit_residual(probs, label, lambda, A));
}

}  // namespace

int ModelShape::param_count() const {
    if (arch == Arch::linear) return num_classes * input_dim + num_classes;
    return hidden * input_dim + hidden + num_classes * hidden + num_classes;
}

DatasetView full_view(const LabeledDataset& ds) {
    DatasetView v;
    v.features = &ds.features;
    v.indices.resize(ds.size());
    std::iota(v.indices.begin(), v.indices.end(), 0);
    v.labels = ds.labels;
    v.num_classes = ds.num_classes;
    return v;
}

DatasetView noisy_view(const NoisyDataset& ds) { return full_view(ds.base); }

ParamVector init_params(const ModelShape& shape, std::uint64_t seed) {
    ParamVector p;
    p.shape = shape;
    p.values.setZero(shape.param_count());
    Rng rng(derive_seed(seed, 4));
    auto fill = [&](double* data, int rows, int cols, int fan_in) {
        const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int i = 0; i < rows * cols; ++i) data[i] = std * rng.normal();
    };
    if (shape.arch == Arch::linear) {
        fill(p.values.data(), shape.num_classes, shape.input_dim, shape.input_dim);
    } else {
        fill(p.values.data(), shape.hidden, shape.input_dim, shape.input_dim);
        double* w2 = p.values.data() + shape.hidden * shape.input_dim + shape.hidden;
        fill(w2, shape.num_classes, shape.hidden, shape.hidden);
    }
    return p;  // biases stay zero
}

Eigen::VectorXd logits(const ParamVector& params, const Eigen::VectorXd& x) {
    check_input(params.shape, x);
    const auto b = split(params.shape, params.values);
    if (params.shape.arch == Arch::linear) return b.w2 * x + b.b2;
    const VectorXd hidden = (b.w1 * x + b.b1).array().tanh();
    return b.w2 * hidden + b.b2;
}

Eigen::VectorXd forward(const ParamVector& params, const Eigen::VectorXd& x) {
    return softmax(logits(params, x));
}

double ce_loss(const Eigen::VectorXd& probs, int label) {
    if (label < 0 || label >= static_cast<int>(probs.size()))
        throw IndexError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(probs.size()) + " classes");
    return -std::log(std::max(probs(label), kProbFloor));
}

ParamVector ce_grad(const ParamVector& params, const Eigen::VectorXd& x, int label) {
    return objective_grad(params, x, label, 0.0, 0.0);
}

double reg_loss(const ParamVector& params, const Eigen::VectorXd& x, int noisy_label, double lambda, double A) {
    if (A >= 0.0) throw InvalidSpecError("log_zero_const must be < 0");
    const VectorXd probs = forward(params, x);
    const double p = probs(noisy_label);
    // One-hot y' collapses the reversed term to -A * (1 - p_label).
    return -std::log(std::max(p, kProbFloor)) - lambda * A * (1.0 - p);
}

ParamVector reg_grad(const ParamVector& params, const Eigen::VectorXd& x, int noisy_label, double lambda,
                     double A) {
    if (A >= 0.0) throw InvalidSpecError("log_zero_const must be < 0");
    return objective_grad(params, x, noisy_label, lambda, A);
}

Trajectory train(const DatasetView& view, const TrainHyper& hyper, bool use_reg) {
    if (view.indices.empty()) throw EmptyTrainingSetError("training view is empty");
    if (hyper.log_zero_const >= 0.0) throw InvalidSpecError("log_zero_const must be < 0");
    ModelShape shape{hyper.arch, static_cast<int>(view.features->cols()), view.num_classes, hyper.hidden};

    Trajectory traj;
    traj.shape = shape;
    traj.hyper = hyper;
    traj.trained_on = std::to_string(view.size()) + " samples";
    ParamVector params = init_params(shape, hyper.seed);
    traj.checkpoints.push_back(params.values);
    traj.epochs.push_back(0);

    const int n = view.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const double lambda = use_reg ? hyper.lambda : 0.0;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(hyper.seed, 5, static_cast<std::uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.integer(static_cast<std::uint64_t>(i + 1))]);
        for (int start = 0; start < n; start += hyper.batch_size) {
            const int end = std::min(start + hyper.batch_size, n);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values.size());
            for (int k = start; k < end; ++k) {
                const int j = order[k];
                const Eigen::VectorXd x = view.features->row(view.indices[j]).transpose();
                grad += objective_grad(params, x, view.labels[j], lambda, hyper.log_zero_const).values;
            }
            params.values -= (hyper.learning_rate / static_cast<double>(end - start)) * grad;
        }
        traj.checkpoints.push_back(params.values);
        traj.epochs.push_back(epoch);
    }
    return traj;
}

std::vector<double> per_sample_losses(const ParamVector& params, const DatasetView& view) {
    std::vector<double> losses(view.size());
    for (int j = 0; j < view.size(); ++j) {
        const Eigen::VectorXd x = view.features->row(view.indices[j]).transpose();
        losses[j] = ce_loss(forward(params, x), view.labels[j]);
    }
    return losses;
}

double accuracy(const ParamVector& params, const LabeledDataset& test) {
    int correct = 0;
    for (int i = 0; i < test.size(); ++i) {
        const Eigen::VectorXd z = logits(params, test.features.row(i).transpose());
        int argmax = 0;
        z.maxCoeff(&argmax);
        if (argmax == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["arch"] = traj.shape.arch == Arch::linear ? "linear" : "mlp";
    meta["input_dim"] = traj.shape.input_dim;
    meta["num_classes"] = traj.shape.num_classes;
    meta["hidden"] = traj.shape.hidden;
    meta["epochs"] = traj.epochs;
    meta["trained_on"] = traj.trained_on;
    meta["hyper"] = {{"epochs", traj.hyper.epochs},
                     {"batch_size", traj.hyper.batch_size},
                     {"learning_rate", traj.hyper.learning_rate},
                     {"lambda", traj.hyper.lambda},
                     {"log_zero_const", traj.hyper.log_zero_const},
                     {"seed", traj.hyper.seed}};
    write_file(dir / "trajectory.json", meta.dump(2) + "\n");
    for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "checkpoint_%04zu.csv", i);
        write_matrix_csv(dir / name, traj.checkpoints[i]);
    }
}

Trajectory load_trajectory(const std::filesystem::path& dir) {
    Trajectory traj;
    const auto meta = nlohmann::json::parse(read_file(dir / "trajectory.json"));
    traj.shape.arch = meta.at("arch").get<std::string>() == "linear" ? Arch::linear : Arch::mlp;
    traj.shape.input_dim = meta.at("input_dim").get<int>();
    traj.shape.num_classes = meta.at("num_classes").get<int>();
    traj.shape.hidden = meta.at("hidden").get<int>();
    traj.epochs = meta.at("epochs").get<std::vector<int>>();
    traj.trained_on = meta.at("trained_on").get<std::string>();
    const auto& h = meta.at("hyper");
    traj.hyper.epochs = h.at("epochs").get<int>();
    traj.hyper.batch_size = h.at("batch_size").get<int>();
    traj.hyper.learning_rate = h.at("learning_rate").get<double>();
    traj.hyper.lambda = h.at("lambda").get<double>();
    traj.hyper.log_zero_const = h.at("log_zero_const").get<double>();
    traj.hyper.seed = h.at("seed").get<std::uint64_t>();
    traj.hyper.arch = traj.shape.arch;
    traj.hyper.hidden = traj.shape.hidden;
    for (std::size_t i = 0; i < traj.epochs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "checkpoint_%04zu.csv", i);
        const Eigen::MatrixXd m = read_matrix_csv(dir / name);
        traj.checkpoints.push_back(Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
    }
    return traj;
}

}  // namespace tad
