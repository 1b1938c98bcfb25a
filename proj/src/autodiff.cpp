#include "tad/autodiff.hpp"

#include <cmath>
#include <utility>

#include "tad/errors.hpp"
#include "tad/model.hpp"

namespace tad::ad {

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": operand shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
    }
}

}  // namespace

const Tape::Node& Tape::at(NodeId n) const {
    if (!n.valid() || n.index >= static_cast<int>(nodes_.size())) {
        throw IndexError("tape node id " + std::to_string(n.index) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(n.index)];
}

NodeId Tape::emit(Eigen::MatrixXd value, const char* op,
                  std::function<void(Tape&, const Eigen::MatrixXd&)> back) {
    const int index = static_cast<int>(nodes_.size());
    if (!value.allFinite()) {
        throw NumericError(std::string("non-finite value produced by op '") + op + "'", index);
    }
    Node node;
    node.value = std::move(value);
    node.back = std::move(back);
    node.op = op;
    nodes_.push_back(std::move(node));
    return NodeId{index};
}

NodeId Tape::input(const Eigen::MatrixXd& v) { return emit(v, "input", nullptr); }

NodeId Tape::constant(const Eigen::MatrixXd& v) { return emit(v, "constant", nullptr); }

NodeId Tape::add(NodeId a, NodeId b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    require_same_shape(va, vb, "add");
    return emit(va + vb, "add", [a, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += g;
        t.grad_ref(b) += g;
    });
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    require_same_shape(va, vb, "sub");
    return emit(va - vb, "sub", [a, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += g;
        t.grad_ref(b) -= g;
    });
}

NodeId Tape::scale(NodeId a, double c) {
    return emit(at(a).value * c, "scale", [a, c](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += c * g;
    });
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    require_same_shape(va, vb, "hadamard");
    return emit(va.cwiseProduct(vb), "hadamard", [a, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += g.cwiseProduct(t.at(b).value);
        t.grad_ref(b) += g.cwiseProduct(t.at(a).value);
    });
}

NodeId Tape::log(NodeId a) {
    const Eigen::MatrixXd clamped = at(a).value.cwiseMax(kProbFloor);
    Eigen::MatrixXd v = clamped.array().log().matrix();
    return emit(std::move(v), "log", [a, clamped](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += g.cwiseQuotient(clamped);
    });
}

NodeId Tape::tanh(NodeId a) {
    Eigen::MatrixXd v = at(a).value.array().tanh().matrix();
    const NodeId self{static_cast<int>(nodes_.size())};
    return emit(std::move(v), "tanh", [a, self](Tape& t, const Eigen::MatrixXd& g) {
        const auto& h = t.at(self).value;
        t.grad_ref(a) += g.cwiseProduct((1.0 - h.array().square()).matrix());
    });
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    if (va.cols() != vb.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(va.cols()) + " and " +
                         std::to_string(vb.rows()) + " differ");
    }
    return emit(va * vb, "matmul", [a, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += g * t.at(b).value.transpose();
        t.grad_ref(b) += t.at(a).value.transpose() * g;
    });
}

NodeId Tape::matmul_tn(NodeId a, NodeId b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    if (va.rows() != vb.rows()) {
        throw ShapeError("matmul_tn: leading dimensions " + std::to_string(va.rows()) + " and " +
                         std::to_string(vb.rows()) + " differ");
    }
    return emit(va.transpose() * vb, "matmul_tn", [a, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += t.at(b).value * g.transpose();
        t.grad_ref(b) += t.at(a).value * g;
    });
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
    const auto& vx = at(x).value;
    const auto& vw = at(w).value;
    const auto& vb = at(b).value;
    if (vx.cols() != vw.cols()) {
        throw ShapeError("affine: input dim " + std::to_string(vx.cols()) +
                         " does not match weight dim " + std::to_string(vw.cols()));
    }
    if (vb.rows() != 1 || vb.cols() != vw.rows()) {
        throw ShapeError("affine: bias must be 1x" + std::to_string(vw.rows()));
    }
    Eigen::MatrixXd v = vx * vw.transpose();
    v.rowwise() += vb.row(0);
    return emit(std::move(v), "affine", [x, w, b](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(x) += g * t.at(w).value;
        t.grad_ref(w) += g.transpose() * t.at(x).value;
        t.grad_ref(b) += g.colwise().sum();
    });
}

NodeId Tape::softmax(NodeId a) {
    const auto& va = at(a).value;
    Eigen::MatrixXd p(va.rows(), va.cols());
    for (Eigen::Index i = 0; i < va.rows(); ++i) {
        const double m = va.row(i).maxCoeff();
        Eigen::RowVectorXd e = (va.row(i).array() - m).exp().matrix();
        p.row(i) = e / e.sum();
    }
    const NodeId self{static_cast<int>(nodes_.size())};
    return emit(std::move(p), "softmax", [a, self](Tape& t, const Eigen::MatrixXd& g) {
        const auto& prob = t.at(self).value;
        auto& dst = t.grad_ref(a);
        for (Eigen::Index i = 0; i < prob.rows(); ++i) {
            const double dot = g.row(i).dot(prob.row(i));
            dst.row(i) += (prob.row(i).array() * (g.row(i).array() - dot)).matrix();
        }
    });
}

NodeId Tape::norm_sq(NodeId a) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = at(a).value.squaredNorm();
    return emit(std::move(v), "norm_sq", [a](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a) += 2.0 * g(0, 0) * t.at(a).value;
    });
}

NodeId Tape::sum(NodeId a) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = at(a).value.sum();
    return emit(std::move(v), "sum", [a](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a).array() += g(0, 0);
    });
}

NodeId Tape::col_sum(NodeId a) {
    Eigen::MatrixXd v = at(a).value.colwise().sum();
    return emit(std::move(v), "col_sum", [a](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a).rowwise() += g.row(0);
    });
}

NodeId Tape::pick(NodeId a, int i, int j) {
    const auto& va = at(a).value;
    if (i < 0 || i >= va.rows() || j < 0 || j >= va.cols()) {
        throw IndexError("pick: entry (" + std::to_string(i) + "," + std::to_string(j) +
                         ") outside " + std::to_string(va.rows()) + "x" + std::to_string(va.cols()));
    }
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = va(i, j);
    return emit(std::move(v), "pick", [a, i, j](Tape& t, const Eigen::MatrixXd& g) {
        t.grad_ref(a)(i, j) += g(0, 0);
    });
}

NodeId Tape::block(NodeId a, int i, int j, int rows, int cols) {
    const auto& va = at(a).value;
    if (i < 0 || j < 0 || rows < 0 || cols < 0 || i + rows > va.rows() || j + cols > va.cols()) {
        throw IndexError("block: region (" + std::to_string(i) + "," + std::to_string(j) + "," +
                         std::to_string(rows) + "," + std::to_string(cols) + ") outside " +
                         std::to_string(va.rows()) + "x" + std::to_string(va.cols()));
    }
    return emit(va.block(i, j, rows, cols), "block",
                [a, i, j, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
                    t.grad_ref(a).block(i, j, rows, cols) += g;
                });
}

NodeId Tape::reshape(NodeId a, int rows, int cols) {
    const auto& va = at(a).value;
    if (static_cast<Eigen::Index>(rows) * cols != va.size()) {
        throw ShapeError("reshape: cannot view " + std::to_string(va.size()) + " entries as " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
    Eigen::MatrixXd v = Eigen::Map<const Eigen::MatrixXd>(va.data(), rows, cols);
    return emit(std::move(v), "reshape", [a](Tape& t, const Eigen::MatrixXd& g) {
        auto& dst = t.grad_ref(a);
        Eigen::Map<const Eigen::MatrixXd> flat(g.data(), dst.rows(), dst.cols());
        dst += flat;
    });
}

const Eigen::MatrixXd& Tape::value(NodeId n) const { return at(n).value; }

double Tape::scalar(NodeId n) const {
    const auto& v = at(n).value;
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("scalar: node is " + std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + ", expected 1x1");
    }
    return v(0, 0);
}

void Tape::backward(NodeId root) {
    const auto& r = at(root);
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        throw ShapeError("backward: root must be 1x1");
    }
    for (auto& node : nodes_) {
        node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
    }
    nodes_[static_cast<std::size_t>(root.index)].grad(0, 0) = 1.0;
    for (int i = root.index; i >= 0; --i) {
        auto& node = nodes_[static_cast<std::size_t>(i)];
        if (node.back && !node.grad.isZero(0.0)) {
            node.back(*this, node.grad);
        }
    }
}

const Eigen::MatrixXd& Tape::gradient(NodeId n) const {
    const auto& node = at(n);
    if (node.grad.size() == 0) {
        throw InvalidSpecError("gradient requested before backward()");
    }
    return node.grad;
}

ValueGrad value_and_grad(const ScalarFunction& f, const Eigen::VectorXd& point) {
    if (point.size() != f.input_length) {
        throw ShapeError("value_and_grad: point length " + std::to_string(point.size()) +
                         " does not match declared input length " + std::to_string(f.input_length));
    }
    Tape tape;
    NodeId x = tape.input(point);
    NodeId out = f.build(tape, x);
    tape.backward(out);
    ValueGrad result;
    result.value = tape.scalar(out);
    result.grad = tape.gradient(x).col(0);
    return result;
}

Eigen::VectorXd grad(const ScalarFunction& f, const Eigen::VectorXd& point) {
    return value_and_grad(f, point).grad;
}

}  // namespace tad::ad
