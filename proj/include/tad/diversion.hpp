#ifndef TAD_DIVERSION_HPP
#define TAD_DIVERSION_HPP

#include <array>
#include <filesystem>
#include <vector>

namespace tad {

inline constexpr double kGmmTol = 1e-6;
inline constexpr int kGmmMaxIter = 200;
inline constexpr double kVarianceFloor = 1e-8;

struct GmmFit {
    std::array<double, 2> pi{0.5, 0.5};
    std::array<double, 2> mu{0.0, 0.0};
    std::array<double, 2> sigma2{kVarianceFloor, kVarianceFloor};
    int trusted_component = 0;  // index of the smaller-mean component
    std::vector<double> loglik_history;
    bool degenerate = false;    // all losses identical
};

// Optional explicit EM initialization; used by the affine-equivariance checks.
struct GmmInit {
    std::array<double, 2> pi;
    std::array<double, 2> mu;
    std::array<double, 2> sigma2;
};

// Two-component 1-D Gaussian mixture via EM. Deterministic default
// initialization: mu = {min, max}, equal pi, common variance = sample
// variance (floored).
GmmFit fit_gmm2(const std::vector<double>& losses, double tol = kGmmTol, int max_iter = kGmmMaxIter);
GmmFit fit_gmm2(const std::vector<double>& losses, const GmmInit& init, double tol = kGmmTol,
                int max_iter = kGmmMaxIter);

// Posterior probability of the trusted (smaller-mean) component per sample.
std::vector<double> confidences(const GmmFit& fit, const std::vector<double>& losses);

// tau_c = mean confidence over samples whose working label is c.
std::vector<double> class_thresholds(const std::vector<double>& w, const std::vector<int>& labels,
                                     int num_classes);

struct TrustPartition {
    std::vector<double> confidences;
    std::vector<double> thresholds;       // per class
    std::vector<int> trusted_idx;         // sorted
    std::vector<int> untrusted_idx;       // sorted
    std::vector<int> working_labels;

    int size() const { return static_cast<int>(working_labels.size()); }
    bool is_trusted(int i) const;
};

// Sample i is trusted iff w_i >= tau_{label_i} (ties trusted).
TrustPartition partition(const std::vector<double>& w, const std::vector<int>& labels,
                         const std::vector<double>& thresholds);

void save_gmm(const std::filesystem::path& path, const GmmFit& fit);
GmmFit load_gmm(const std::filesystem::path& path);
void save_partition(const std::filesystem::path& path, const TrustPartition& part);
TrustPartition load_partition(const std::filesystem::path& path);

}  // namespace tad

#endif  // TAD_DIVERSION_HPP
