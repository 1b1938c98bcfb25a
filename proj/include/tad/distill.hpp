#ifndef TAD_DISTILL_HPP
#define TAD_DISTILL_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tad/hypergrad.hpp"
#include "tad/synthetic.hpp"

namespace tad {

struct DistillSpec {
    int outer_iterations = 300;
    double synthetic_lr = 0.1;
    int student_steps = 10;   // N
    double student_lr = 0.1;
    int expert_skip = 1;      // M
    int t_min = 0;
    int t_max = -1;           // -1: widest valid window
    bool anchors_mode = false;
    int early_window = 4;     // E_a, caps t_max in anchors_mode
    bool dump_step_losses = false;  // debug: per-student-step loss CSV
};

struct DistillLogRow {
    int iteration = 0;
    int expert_id = 0;
    int start_epoch = 0;
    double loss = 0.0;  // NaN when the sampled segment was degenerate
};

struct DistillResult {
    SyntheticSet synthetic;
    std::vector<DistillLogRow> log;
    std::vector<std::vector<double>> step_losses;  // only when dump_step_losses
};

// ||student_end - expert_target||^2 / ||expert_start - expert_target||^2.
double tm_loss(const Eigen::VectorXd& student_end, const Eigen::VectorXd& expert_start,
               const Eigen::VectorXd& expert_target);

// Gradient descent on the synthetic features against uniformly sampled
// (expert, start epoch) segments. Labels never change.
DistillResult distill(const std::vector<Trajectory>& experts, const SyntheticSet& init,
                      const DistillSpec& spec, std::uint64_t seed);

// Anchors: init from the trusted view, distill with anchors_mode forced on.
SyntheticSet synthesize_anchors(const std::vector<Trajectory>& experts, const DatasetView& trusted,
                                int ipc, const DistillSpec& spec, std::uint64_t seed);

void write_distill_log(const std::filesystem::path& path, const std::vector<DistillLogRow>& log);
void write_step_losses(const std::filesystem::path& path,
                       const std::vector<std::vector<double>>& step_losses);

}  // namespace tad

#endif  // TAD_DISTILL_HPP
