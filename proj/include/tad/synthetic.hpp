#ifndef TAD_SYNTHETIC_HPP
#define TAD_SYNTHETIC_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tad/model.hpp"

namespace tad {

// Distillation target: ipc features per class, labels fixed and balanced.
struct SyntheticSet {
    Eigen::MatrixXd features;  // (ipc * num_classes) x dim
    std::vector<int> labels;   // class-major: ipc entries of 0, then of 1, ...
    int ipc = 0;
    int num_classes = 0;

    int size() const { return static_cast<int>(labels.size()); }
};

// Real-sample initialization: per class, ipc rows drawn without replacement
// from the source view.
SyntheticSet init_synthetic(const DatasetView& source, int ipc, std::uint64_t seed);

void save_synthetic(const std::filesystem::path& dir, const SyntheticSet& set);
SyntheticSet load_synthetic(const std::filesystem::path& dir);

}  // namespace tad

#endif  // TAD_SYNTHETIC_HPP
