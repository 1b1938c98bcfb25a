#include "tad/model_tape.hpp"

#include "tad/errors.hpp"

namespace tad {

namespace {

struct Extents {
    // {rows, cols} per block in layout order.
    std::vector<std::pair<int, int>> dims;
};

Extents block_extents(const ModelShape& s) {
    if (s.arch == Arch::linear) {
        return {{{s.num_classes, s.input_dim}, {1, s.num_classes}}};
    }
    return {{{s.hidden, s.input_dim},
             {1, s.hidden},
             {s.num_classes, s.hidden},
             {1, s.num_classes}}};
}

}  // namespace

std::vector<Eigen::MatrixXd> split_blocks(const ModelShape& shape, const Eigen::VectorXd& flat) {
    if (flat.size() != shape.param_count()) {
        throw ShapeError("parameter vector length " + std::to_string(flat.size()) +
                         " != expected " + std::to_string(shape.param_count()));
    }
    std::vector<Eigen::MatrixXd> blocks;
    int offset = 0;
    for (const auto& [rows, cols] : block_extents(shape).dims) {
        blocks.emplace_back(Eigen::Map<const Eigen::MatrixXd>(flat.data() + offset, rows, cols));
        offset += rows * cols;
    }
    return blocks;
}

Eigen::VectorXd pack_blocks(const ModelShape& shape, const std::vector<Eigen::MatrixXd>& blocks) {
    const auto extents = block_extents(shape);
    if (blocks.size() != extents.dims.size()) {
        throw ShapeError("expected " + std::to_string(extents.dims.size()) + " blocks, got " +
                         std::to_string(blocks.size()));
    }
    Eigen::VectorXd flat(shape.param_count());
    int offset = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto [rows, cols] = extents.dims[k];
        if (blocks[k].rows() != rows || blocks[k].cols() != cols) {
            throw ShapeError("block " + std::to_string(k) + " has wrong shape");
        }
        Eigen::Map<Eigen::MatrixXd>(flat.data() + offset, rows, cols) = blocks[k];
        offset += rows * cols;
    }
    return flat;
}

std::vector<ad::NodeId> split_param_node(ad::Tape& tape, const ModelShape& shape, ad::NodeId flat) {
    const auto& v = tape.value(flat);
    if (v.cols() != 1 || v.rows() != shape.param_count()) {
        throw ShapeError("parameter node must be " + std::to_string(shape.param_count()) + "x1");
    }
    std::vector<ad::NodeId> blocks;
    int offset = 0;
    for (const auto& [rows, cols] : block_extents(shape).dims) {
        // Column-major relabeling of a contiguous slice matches the Map-based
        // layout used by the plain model code.
        blocks.push_back(tape.reshape(tape.block(flat, offset, 0, rows * cols, 1), rows, cols));
        offset += rows * cols;
    }
    return blocks;
}

ad::NodeId tape_probs(ad::Tape& tape, const ModelShape& shape, const std::vector<ad::NodeId>& blocks,
                      ad::NodeId x) {
    if (shape.arch == Arch::linear) {
        return tape.softmax(tape.affine(x, blocks[0], blocks[1]));
    }
    const ad::NodeId hidden = tape.tanh(tape.affine(x, blocks[0], blocks[1]));
    return tape.softmax(tape.affine(hidden, blocks[2], blocks[3]));
}

std::vector<ad::NodeId> tape_mean_ce_grads(ad::Tape& tape, const ModelShape& shape,
                                           const std::vector<ad::NodeId>& blocks, ad::NodeId x,
                                           ad::NodeId onehot) {
    const auto n = static_cast<double>(tape.value(x).rows());
    if (shape.arch == Arch::linear) {
        const ad::NodeId probs = tape.softmax(tape.affine(x, blocks[0], blocks[1]));
        const ad::NodeId r = tape.scale(tape.sub(probs, onehot), 1.0 / n);
        return {tape.matmul_tn(r, x), tape.col_sum(r)};
    }
    const ad::NodeId hidden = tape.tanh(tape.affine(x, blocks[0], blocks[1]));
    const ad::NodeId probs = tape.softmax(tape.affine(hidden, blocks[2], blocks[3]));
    const ad::NodeId r = tape.scale(tape.sub(probs, onehot), 1.0 / n);
    const ad::NodeId ones = tape.constant(
        Eigen::MatrixXd::Ones(tape.value(hidden).rows(), tape.value(hidden).cols()));
    const ad::NodeId gate = tape.sub(ones, tape.hadamard(hidden, hidden));
    const ad::NodeId back = tape.hadamard(tape.matmul(r, blocks[2]), gate);
    return {tape.matmul_tn(back, x), tape.col_sum(back), tape.matmul_tn(r, hidden), tape.col_sum(r)};
}

ad::NodeId tape_ce_scalar(ad::Tape& tape, const ModelShape& shape, ad::NodeId flat_params,
                          const Eigen::VectorXd& x, int label) {
    if (label < 0 || label >= shape.num_classes) {
        throw IndexError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(shape.num_classes) + " classes");
    }
    const auto blocks = split_param_node(tape, shape, flat_params);
    const ad::NodeId xrow = tape.constant(x.transpose());
    const ad::NodeId probs = tape_probs(tape, shape, blocks, xrow);
    return tape.scale(tape.log(tape.pick(probs, 0, label)), -1.0);
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw IndexError("label " + std::to_string(labels[i]) + " out of range for " +
                             std::to_string(num_classes) + " classes");
        }
        y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return y;
}

}  // namespace tad
