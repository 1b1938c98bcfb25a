#ifndef TAD_AUTODIFF_HPP
#define TAD_AUTODIFF_HPP

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace tad::ad {

struct NodeId {
    int index = -1;
    bool valid() const { return index >= 0; }
};

// Per-call reverse-mode tape over dense matrices. Values are computed eagerly
// when an op is recorded; every op checks its result for finiteness and
// throws NumericError with its tape index otherwise. No global state: each
// Tape instance owns its own recording, so independent calls may run in
// parallel.
class Tape {
public:
    NodeId input(const Eigen::MatrixXd& v);     // differentiable leaf
    NodeId constant(const Eigen::MatrixXd& v);  // non-differentiable leaf

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId log(NodeId a);   // elementwise, floored at kProbFloor
    NodeId tanh(NodeId a);  // elementwise

    NodeId matmul(NodeId a, NodeId b);     // A * B
    NodeId matmul_tn(NodeId a, NodeId b);  // A^T * B
    // X * W^T + row-broadcast bias; x is (N x D), w is (K x D), b is (1 x K).
    NodeId affine(NodeId x, NodeId w, NodeId b);

    NodeId softmax(NodeId a);  // row-wise
    NodeId norm_sq(NodeId a);  // squared Frobenius norm, 1x1
    NodeId sum(NodeId a);      // 1x1
    NodeId col_sum(NodeId a);  // 1 x cols
    NodeId pick(NodeId a, int i, int j);  // single entry, 1x1

    NodeId block(NodeId a, int i, int j, int rows, int cols);
    NodeId reshape(NodeId a, int rows, int cols);  // column-major relabeling

    const Eigen::MatrixXd& value(NodeId n) const;
    double scalar(NodeId n) const;

    // Reverse sweep from a 1x1 root; gradients accumulate onto every node.
    void backward(NodeId root);
    const Eigen::MatrixXd& gradient(NodeId n) const;

    int num_ops() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Eigen::MatrixXd value;
        Eigen::MatrixXd grad;
        std::function<void(Tape&, const Eigen::MatrixXd&)> back;  // receives this node's grad
        const char* op = "";
    };

    NodeId emit(Eigen::MatrixXd value, const char* op,
                std::function<void(Tape&, const Eigen::MatrixXd&)> back);
    Eigen::MatrixXd& grad_ref(NodeId n) { return nodes_[static_cast<std::size_t>(n.index)].grad; }
    const Node& at(NodeId n) const;

    std::vector<Node> nodes_;
};

// A scalar objective expressed as tape ops over one flat input vector.
struct ScalarFunction {
    int input_length = 0;
    std::function<NodeId(Tape&, NodeId)> build;  // input node has shape (input_length x 1)
};

struct ValueGrad {
    double value = 0.0;
    Eigen::VectorXd grad;
};

ValueGrad value_and_grad(const ScalarFunction& f, const Eigen::VectorXd& point);
Eigen::VectorXd grad(const ScalarFunction& f, const Eigen::VectorXd& point);

}  // namespace tad::ad

#endif  // TAD_AUTODIFF_HPP
