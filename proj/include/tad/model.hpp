#ifndef TAD_MODEL_HPP
#define TAD_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tad/dataset.hpp"

namespace tad {

// Floor applied inside every log of a predicted probability.
inline constexpr double kProbFloor = 1e-12;

enum class Arch { linear, mlp };

struct ModelShape {
    Arch arch = Arch::linear;
    int input_dim = 0;
    int num_classes = 0;
    int hidden = 0;  // mlp only

    int param_count() const;
    bool operator==(const ModelShape&) const = default;
};

struct ParamVector {
    Eigen::VectorXd values;
    ModelShape shape;
};

struct TrainHyper {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 0.1;
    double lambda = 1.0;          // weight of the reversed-CE regularizer
    double log_zero_const = -4.0; // stand-in for log(0) in the regularizer, must be < 0
    std::uint64_t seed = 0;
    Arch arch = Arch::linear;
    int hidden = 0;
};

struct Trajectory {
    ModelShape shape;
    std::vector<Eigen::VectorXd> checkpoints;  // checkpoints[0] is the initialization
    std::vector<int> epochs;                   // strictly increasing, parallel to checkpoints
    TrainHyper hyper;
    std::string trained_on;
};

// Rows of `features` selected by `indices`, each with its own working label.
// This is the only face of a dataset training code ever sees.
struct DatasetView {
    const Eigen::MatrixXd* features = nullptr;
    std::vector<int> indices;
    std::vector<int> labels;
    int num_classes = 0;

    int size() const { return static_cast<int>(indices.size()); }
};

DatasetView full_view(const LabeledDataset& ds);
DatasetView noisy_view(const NoisyDataset& ds);

ParamVector init_params(const ModelShape& shape, std::uint64_t seed);

Eigen::VectorXd logits(const ParamVector& params, const Eigen::VectorXd& x);
Eigen::VectorXd forward(const ParamVector& params, const Eigen::VectorXd& x);

double ce_loss(const Eigen::VectorXd& probs, int label);

// Analytic gradient of ce_loss(forward(params, x), label) w.r.t. params.
ParamVector ce_grad(const ParamVector& params, const Eigen::VectorXd& x, int label);

// CE plus the reversed-CE term with log(0) := A. Equals ce_loss when lambda=0.
double reg_loss(const ParamVector& params, const Eigen::VectorXd& x, int noisy_label, double lambda, double A);
ParamVector reg_grad(const ParamVector& params, const Eigen::VectorXd& x, int noisy_label, double lambda, double A);

Trajectory train(const DatasetView& view, const TrainHyper& hyper, bool use_reg);

std::vector<double> per_sample_losses(const ParamVector& params, const DatasetView& view);

double accuracy(const ParamVector& params, const LabeledDataset& test);

// Directory of numbered checkpoint CSVs plus trajectory.json.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace tad

#endif  // TAD_MODEL_HPP
