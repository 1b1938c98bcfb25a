#ifndef TAD_HARNESS_HPP
#define TAD_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tad/dataset.hpp"
#include "tad/distill.hpp"
#include "tad/diversion.hpp"
#include "tad/model.hpp"
#include "tad/recalibration.hpp"
#include "tad/synthetic.hpp"

namespace tad {

struct RecalConfig {
    int top_k = 10;
    double recall_margin = kRecallMargin;
    EmbedderKind embedder = EmbedderKind::identity;
    int embed_dim = 0;  // projection only
    std::uint64_t embed_seed = 0;
    double ridge_scale = kRidgeScale;
    bool weight_by_distance = false;
    int anchor_ipc = 10;
    int anchor_iterations = 100;
};

struct DualLoopConfig {
    int rounds = 3;  // R; 0 runs the plain trajectory-matching baseline
    int num_experts = 3;
    TrainHyper expert;
    int loss_window_lo = 1;  // per-sample losses averaged over this epoch window
    int loss_window_hi = 4;
    RecalConfig recal;
    DistillSpec distill;
    int ipc = 10;
    TrainHyper student;
    int eval_repeats = 5;
    std::uint64_t seed = 0;  // master seed of the loop
};

struct RoundRecord {
    int round = 0;
    int trusted_count = 0;
    int promotions = 0;
    int demotions = 0;
    double gmm_mu1 = 0.0;  // trusted (smaller) component mean
    double gmm_mu2 = 0.0;
    // NaN when the dataset carries no evaluation view.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct StudentEval {
    std::vector<double> accuracies;
    double mean = 0.0;
    double stddev = 0.0;  // population
};

struct MoveRecord {
    int round = 0;
    Move move;
};

struct TadResult {
    TrustPartition final_partition;
    SyntheticSet synthetic;
    std::vector<RoundRecord> history;  // length = rounds
    std::vector<MoveRecord> moves;
    std::vector<DistillLogRow> distill_log;  // final distillation
    std::vector<std::vector<double>> distill_step_losses;
    GmmFit final_gmm;
    std::optional<StudentEval> eval;
    bool baseline = false;  // rounds == 0
};

// The full dual loop. Training-path computation reads only ds.base; the
// optional eval view feeds partition metrics in the history and nothing else.
TadResult run_dual_loop(const NoisyDataset& ds, const DualLoopConfig& cfg,
                        const LabeledDataset* test = nullptr);

StudentEval evaluate_student(const SyntheticSet& synthetic, const LabeledDataset& test,
                             const TrainHyper& hyper, int repeats);

struct PartitionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_trusted = false;
};

// Trusted = predicted clean; !flip_mask = actually clean.
PartitionMetrics partition_metrics(const TrustPartition& part, const std::vector<bool>& flip_mask);

void write_history_csv(const std::filesystem::path& path, const std::vector<RoundRecord>& history);
std::vector<RoundRecord> read_history_csv(const std::filesystem::path& path);

}  // namespace tad

#endif  // TAD_HARNESS_HPP
