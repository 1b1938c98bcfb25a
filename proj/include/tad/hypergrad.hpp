#ifndef TAD_HYPERGRAD_HPP
#define TAD_HYPERGRAD_HPP

#include <Eigen/Core>
#include <vector>

#include "tad/model.hpp"
#include "tad/synthetic.hpp"

namespace tad {

// Guard on the trajectory-matching denominator.
inline constexpr double kDenominatorFloor = 1e-12;

struct UnrollSpec {
    int student_steps = 10;    // N, full-batch SGD steps on the synthetic set
    double student_lr = 0.1;
    int start_checkpoint = 0;  // t
    int target_checkpoint = 1; // t + M
};

struct MetaGradResult {
    double loss = 0.0;
    Eigen::MatrixXd feature_grad;  // same shape as synthetic.features
};

// Matching loss of the unrolled student against the expert segment, with the
// exact reverse-mode gradient w.r.t. every synthetic feature entry. When
// step_losses is given it receives the matching loss after each student step
// (the debug dump consumed by the CSV flag in distill).
MetaGradResult meta_grad_tm(const SyntheticSet& synthetic, const Trajectory& expert,
                            const UnrollSpec& spec, std::vector<double>* step_losses = nullptr);

// Forward-only version of the same unroll; returns the student's flat
// parameters after N steps. Shares formulas with meta_grad_tm so the
// zero-numerator case is exact.
Eigen::VectorXd unroll_student(const SyntheticSet& synthetic, const Trajectory& expert,
                               const UnrollSpec& spec);

}  // namespace tad

#endif  // TAD_HYPERGRAD_HPP
