#include "tad/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

double tm_loss(const Eigen::VectorXd& student_end, const Eigen::VectorXd& expert_start,
               const Eigen::VectorXd& expert_target) {
    if (student_end.size() != expert_start.size() || expert_start.size() != expert_target.size())
        throw ShapeError("tm_loss parameter vector lengths differ");
    const double den = (expert_start - expert_target).squaredNorm();
    if (den <= kDenominatorFloor)
        throw DegenerateSegmentError("expert segment has squared length " + std::to_string(den));
    return (student_end - expert_target).squaredNorm() / den;
}

DistillResult distill(const std::vector<Trajectory>& experts, const SyntheticSet& init,
                      const DistillSpec& spec, std::uint64_t seed) {
    if (experts.empty()) throw InvalidSpecError("distill needs at least one expert trajectory");
    if (spec.outer_iterations < 0) throw InvalidSpecError("outer_iterations must be >= 0");
    if (spec.synthetic_lr <= 0.0) throw InvalidSpecError("synthetic_lr must be > 0");
    if (spec.expert_skip < 1) throw InvalidSpecError("expert_skip must be >= 1");
    if (spec.t_min < 0) throw InvalidSpecError("t_min must be >= 0");

    const ModelShape& shape = experts.front().shape;
    for (const auto& e : experts) {
        if (!(e.shape == shape)) throw ShapeError("expert trajectories disagree on model shape");
        if (static_cast<int>(e.checkpoints.size()) < spec.expert_skip + 1)
            throw InvalidSpecError("expert trajectory shorter than expert_skip + 1 checkpoints");
    }
    // The shortest expert bounds the shared sampling window.
    int len = std::numeric_limits<int>::max();
    for (const auto& e : experts) len = std::min(len, static_cast<int>(e.checkpoints.size()));
    int t_max = spec.t_max < 0 ? len - 1 - spec.expert_skip : spec.t_max;
    if (spec.anchors_mode) t_max = std::min(t_max, spec.early_window);
    t_max = std::min(t_max, len - 1 - spec.expert_skip);
    if (t_max < spec.t_min)
        throw InvalidSpecError("segment window [" + std::to_string(spec.t_min) + ", " +
                               std::to_string(t_max) + "] is empty");

    DistillResult result;
    result.synthetic = init;
    Rng rng(derive_seed(seed, 8));
    int usable = 0;
    for (int it = 0; it < spec.outer_iterations; ++it) {
        const int expert_id = static_cast<int>(rng.integer(experts.size()));
        const int t = spec.t_min + static_cast<int>(rng.integer(
                                       static_cast<std::uint64_t>(t_max - spec.t_min + 1)));
        UnrollSpec unroll;
        unroll.student_steps = spec.student_steps;
        unroll.student_lr = spec.student_lr;
        unroll.start_checkpoint = t;
        unroll.target_checkpoint = t + spec.expert_skip;

        DistillLogRow row;
        row.iteration = it;
        row.expert_id = expert_id;
        row.start_epoch = experts[static_cast<std::size_t>(expert_id)].epochs[static_cast<std::size_t>(t)];
        try {
            std::vector<double> steps;
            const auto mg =
                meta_grad_tm(result.synthetic, experts[static_cast<std::size_t>(expert_id)], unroll,
                             spec.dump_step_losses ? &steps : nullptr);
            result.synthetic.features -= spec.synthetic_lr * mg.feature_grad;
            row.loss = mg.loss;
            ++usable;
            if (spec.dump_step_losses) result.step_losses.push_back(std::move(steps));
        } catch (const DegenerateSegmentError&) {
            row.loss = std::numeric_limits<double>::quiet_NaN();
            if (spec.dump_step_losses) result.step_losses.emplace_back();
        }
        result.log.push_back(row);
    }
    if (spec.outer_iterations > 0 && usable == 0)
        throw DistillationFailedError("every sampled expert segment was degenerate");
    return result;
}

SyntheticSet synthesize_anchors(const std::vector<Trajectory>& experts, const DatasetView& trusted,
                                int ipc, const DistillSpec& spec, std::uint64_t seed) {
    DistillSpec anchor_spec = spec;
    anchor_spec.anchors_mode = true;
    const SyntheticSet init = init_synthetic(trusted, ipc, derive_seed(seed, 9));
    return distill(experts, init, anchor_spec, derive_seed(seed, 10)).synthetic;
}

void write_distill_log(const std::filesystem::path& path, const std::vector<DistillLogRow>& log) {
    std::string out = "iteration,expert_id,start_epoch,loss\n";
    for (const auto& row : log) {
        out += std::to_string(row.iteration) + "," + std::to_string(row.expert_id) + "," +
               std::to_string(row.start_epoch) + "," + format_double(row.loss) + "\n";
    }
    write_file(path, out);
}

void write_step_losses(const std::filesystem::path& path,
                       const std::vector<std::vector<double>>& step_losses) {
    std::string out = "iteration,step,loss\n";
    for (std::size_t it = 0; it < step_losses.size(); ++it) {
        for (std::size_t s = 0; s < step_losses[it].size(); ++s) {
            out += std::to_string(it) + "," + std::to_string(s) + "," +
                   format_double(step_losses[it][s]) + "\n";
        }
    }
    write_file(path, out);
}

}  // namespace tad
