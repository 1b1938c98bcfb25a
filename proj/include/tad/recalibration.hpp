#ifndef TAD_RECALIBRATION_HPP
#define TAD_RECALIBRATION_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tad/diversion.hpp"

namespace tad {

enum class EmbedderKind { identity, projection, whitening };

// Deterministic feature map applied before all inner-loop geometry.
struct Embedder {
    EmbedderKind kind = EmbedderKind::identity;
    int input_dim = 0;
    int output_dim = 0;
    Eigen::MatrixXd projection;  // projection: output_dim x input_dim, scaled 1/sqrt(output_dim)
    Eigen::VectorXd mean;        // whitening
    Eigen::VectorXd inv_std;     // whitening
};

Embedder make_identity_embedder(int dim);
Embedder make_projection_embedder(int input_dim, int output_dim, std::uint64_t seed);
Embedder fit_whitening_embedder(const Eigen::MatrixXd& fit_features);

Eigen::MatrixXd embed(const Embedder& e, const Eigen::MatrixXd& features);

struct ClassGaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;      // regularized: anchor covariance + ridge * I
    Eigen::MatrixXd cov_inv;
    double ridge = 0.0;       // epsilon actually added
    bool diagonal = false;    // diagonal-only fallback (few anchors)
};

inline constexpr double kRidgeScale = 1e-3;
inline constexpr double kRidgeFloor = 1e-8;

std::vector<ClassGaussian> class_gaussians(const Eigen::MatrixXd& anchor_feats,
                                           const std::vector<int>& anchor_labels, int num_classes,
                                           double ridge_scale = kRidgeScale);

double mahalanobis(const Eigen::VectorXd& x, const ClassGaussian& g);

struct ReliabilityTable {
    // Parallel to the trusted rows the table was built from.
    std::vector<double> raw_distance;
    std::vector<double> normalized;    // per-class min-max of raw_distance
    std::vector<double> reliability;   // 1 - normalized
    std::vector<std::vector<int>> topk;  // per class, trusted-row indices, descending reliability
    std::vector<bool> in_topk;
    std::vector<int> empty_classes;    // classes with no trusted samples (flagged, not fatal)
    bool weight_by_distance = false;   // ablation: vote with normalized distance instead

    double vote_weight(int row) const {
        return weight_by_distance ? normalized[static_cast<std::size_t>(row)]
                                  : reliability[static_cast<std::size_t>(row)];
    }
};

ReliabilityTable reliability_table(const Eigen::MatrixXd& trusted_feats,
                                   const std::vector<int>& working_labels,
                                   const std::vector<ClassGaussian>& gaussians, int top_k,
                                   bool weight_by_distance = false);

struct PseudoLabel {
    Eigen::VectorXd scores;  // per class
    int argmax = -1;
    double margin = 0.0;     // top / runner-up; +inf when runner-up <= 0 < top; 0 when top <= 0
};

PseudoLabel calibrate(const Eigen::VectorXd& x, const ReliabilityTable& table,
                      const Eigen::MatrixXd& trusted_feats, const std::vector<int>& working_labels);

inline constexpr double kRecallMargin = 2.0;

struct Move {
    int sample = -1;        // global index
    bool promoted = false;  // false: sieved out of the trusted set
    int old_label = -1;
    int new_label = -1;     // differs from old only for promotions
    double margin = 0.0;
};

struct SieveRecallResult {
    TrustPartition partition;
    std::vector<Move> demotions;
    std::vector<Move> promotions;
};

// Scores everything against the frozen table, then applies all moves at once.
// Table rows must correspond to partition.trusted_idx order.
SieveRecallResult sieve_and_recall(const TrustPartition& part, const ReliabilityTable& table,
                                   const Eigen::MatrixXd& embedded_feats, double margin_gamma);

void write_moves_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<int, Move>>& rows);  // (round, move)

}  // namespace tad

#endif  // TAD_RECALIBRATION_HPP
