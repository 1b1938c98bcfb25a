#include "tad/hypergrad.hpp"

#include <string>

#include "tad/errors.hpp"
#include "tad/model_tape.hpp"

namespace tad {

namespace {

struct UnrollProgram {
    ad::Tape tape;
    ad::NodeId x;                        // synthetic features, the differentiable input
    std::vector<ad::NodeId> blocks;      // student parameter blocks after N steps
    std::vector<Eigen::MatrixXd> target; // expert blocks at t+M
    double den = 0.0;
};

double segment_norm_sq(const std::vector<ad::NodeId>& blocks,
                       const std::vector<Eigen::MatrixXd>& target, const ad::Tape& tape) {
    double s = 0.0;
    for (std::size_t k = 0; k < blocks.size(); ++k) s += (tape.value(blocks[k]) - target[k]).squaredNorm();
    return s;
}

UnrollProgram build_unroll(const SyntheticSet& synthetic, const Trajectory& expert,
                           const UnrollSpec& spec, std::vector<double>* step_losses) {
    if (spec.student_steps < 0) throw InvalidSpecError("student_steps must be >= 0");
    if (spec.student_lr < 0.0) throw InvalidSpecError("student_lr must be >= 0");
    const int len = static_cast<int>(expert.checkpoints.size());
    if (spec.start_checkpoint < 0 || spec.start_checkpoint >= len || spec.target_checkpoint < 0 ||
        spec.target_checkpoint >= len) {
        throw BoundsError("checkpoint indices (" + std::to_string(spec.start_checkpoint) + ", " +
                          std::to_string(spec.target_checkpoint) + ") outside trajectory of length " +
                          std::to_string(len));
    }
    if (spec.target_checkpoint <= spec.start_checkpoint)
        throw InvalidSpecError("target_checkpoint must be greater than start_checkpoint");

    const ModelShape& shape = expert.shape;
    if (synthetic.features.cols() != shape.input_dim)
        throw ShapeError("synthetic dim " + std::to_string(synthetic.features.cols()) +
                         " != expert input dim " + std::to_string(shape.input_dim));
    if (synthetic.num_classes != shape.num_classes)
        throw ShapeError("synthetic classes " + std::to_string(synthetic.num_classes) +
                         " != expert classes " + std::to_string(shape.num_classes));
    if (synthetic.size() == 0) throw EmptyTrainingSetError("synthetic set is empty");
    if (synthetic.features.rows() != synthetic.size())
        throw ShapeError("synthetic feature rows do not match label count");

    const Eigen::VectorXd& start = expert.checkpoints[static_cast<std::size_t>(spec.start_checkpoint)];
    const Eigen::VectorXd& goal = expert.checkpoints[static_cast<std::size_t>(spec.target_checkpoint)];

    UnrollProgram prog;
    prog.den = (start - goal).squaredNorm();
    if (prog.den <= kDenominatorFloor)
        throw DegenerateSegmentError("expert segment [" + std::to_string(spec.start_checkpoint) + ", " +
                                     std::to_string(spec.target_checkpoint) +
                                     "] has squared length " + std::to_string(prog.den));

    prog.target = split_blocks(shape, goal);
    prog.x = prog.tape.input(synthetic.features);
    const ad::NodeId onehot = prog.tape.constant(one_hot(synthetic.labels, shape.num_classes));
    for (const auto& b : split_blocks(shape, start)) prog.blocks.push_back(prog.tape.constant(b));

    if (step_losses) step_losses->clear();
    for (int step = 0; step < spec.student_steps; ++step) {
        const auto grads = tape_mean_ce_grads(prog.tape, shape, prog.blocks, prog.x, onehot);
        for (std::size_t k = 0; k < prog.blocks.size(); ++k)
            prog.blocks[k] = prog.tape.sub(prog.blocks[k], prog.tape.scale(grads[k], spec.student_lr));
        if (step_losses)
            step_losses->push_back(segment_norm_sq(prog.blocks, prog.target, prog.tape) / prog.den);
    }
    return prog;
}

}  // namespace

MetaGradResult meta_grad_tm(const SyntheticSet& synthetic, const Trajectory& expert,
                            const UnrollSpec& spec, std::vector<double>* step_losses) {
    UnrollProgram prog = build_unroll(synthetic, expert, spec, step_losses);
    ad::Tape& tape = prog.tape;

    ad::NodeId numerator;
    for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
        const ad::NodeId term =
            tape.norm_sq(tape.sub(prog.blocks[k], tape.constant(prog.target[k])));
        numerator = k == 0 ? term : tape.add(numerator, term);
    }
    const ad::NodeId loss = tape.scale(numerator, 1.0 / prog.den);
    tape.backward(loss);

    MetaGradResult result;
    result.loss = tape.scalar(loss);
    result.feature_grad = tape.gradient(prog.x);
    return result;
}

Eigen::VectorXd unroll_student(const SyntheticSet& synthetic, const Trajectory& expert,
                               const UnrollSpec& spec) {
    UnrollProgram prog = build_unroll(synthetic, expert, spec, nullptr);
    std::vector<Eigen::MatrixXd> values;
    values.reserve(prog.blocks.size());
    for (const auto id : prog.blocks) values.push_back(prog.tape.value(id));
    return pack_blocks(expert.shape, values);
}

}  // namespace tad
