#ifndef TAD_DATASET_HPP
#define TAD_DATASET_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

namespace tad {

struct LabeledDataset {
    Eigen::MatrixXd features;  // num_samples x dim
    std::vector<int> labels;   // values in [0, num_classes)
    int num_classes = 0;

    int size() const { return static_cast<int>(labels.size()); }
    int dim() const { return static_cast<int>(features.cols()); }
};

enum class NoiseKind { symmetric, asymmetric };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double ratio = 0.0;
    std::map<int, int> class_map;  // asymmetric only: source class -> target class
    std::uint64_t seed = 0;
};

// Corrupted dataset plus a sealed evaluation-only view. Training-path code
// must only touch `base`; `eval` exists for metric computation and may be
// absent entirely (the leakage audit strips it).
struct NoisyDataset {
    LabeledDataset base;  // labels are the corrupted ones

    struct EvalView {
        std::vector<int> clean_labels;
        std::vector<bool> flip_mask;
    };
    std::optional<EvalView> eval;

    NoiseSpec noise_spec;

    NoisyDataset without_eval_view() const {
        NoisyDataset copy = *this;
        copy.eval.reset();
        return copy;
    }
};

struct BlobSpec {
    int num_classes = 0;
    int samples_per_class = 0;
    int dim = 0;
    double class_center_scale = 1.0;
    double within_class_stddev = 1.0;
    std::uint64_t seed = 0;
};

// Isotropic Gaussian blobs around seeded random class centers. Samples are
// laid out class-by-class, so positional splits stay class-balanced.
LabeledDataset make_blobs(const BlobSpec& spec);

NoisyDataset inject_noise(const LabeledDataset& ds, const NoiseSpec& spec);

// First train_per_class rows of each class become the train split, the next
// test_per_class the test split. Requires spec-generated (class-major) layout.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds, int train_per_class,
                                                           int test_per_class);

// Directory layout: features.csv, labels.csv, meta.json, and when the eval
// view is present clean_labels.csv + flip_mask.csv.
void save_dataset(const std::filesystem::path& dir, const NoisyDataset& ds);
NoisyDataset load_dataset(const std::filesystem::path& dir);

}  // namespace tad

#endif  // TAD_DATASET_HPP
