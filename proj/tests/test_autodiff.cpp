#include <doctest.h>

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "tad/autodiff.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

using namespace tad;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

// FD check of a scalar built from a single (rows x cols) input.
void check_op(const std::function<ad::NodeId(ad::Tape&, ad::NodeId)>& body, int rows, int cols,
              std::uint64_t seed, double tol = 1e-6, double shift = 0.0) {
    Rng rng(seed);
    Eigen::MatrixXd point = random_matrix(rng, rows, cols);
    point.array() += shift;

    ad::ScalarFunction f;
    f.input_length = rows * cols;
    f.build = [&](ad::Tape& tape, ad::NodeId flat) {
        const ad::NodeId shaped = tape.reshape(flat, rows, cols);
        return body(tape, shaped);
    };

    Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(point.data(), point.size());
    const Eigen::VectorXd analytic = ad::grad(f, flat);
    const Eigen::VectorXd fd = tad_test::central_fd(
        [&](const Eigen::VectorXd& v) {
            ad::Tape tape;
            const ad::NodeId in = tape.input(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
            return tape.scalar(body(tape, in));
        },
        flat, 1e-6);
    CHECK(tad_test::rel_err(analytic, fd) <= tol);
}

}  // namespace

TEST_CASE("grad of sum of squares") {
    ad::ScalarFunction f;
    f.input_length = 2;
    f.build = [](ad::Tape& tape, ad::NodeId v) { return tape.norm_sq(v); };
    Eigen::VectorXd point(2);
    point << 1.0, -2.0;
    const ad::ValueGrad vg = ad::value_and_grad(f, point);
    CHECK(vg.value == doctest::Approx(5.0));
    CHECK(vg.grad(0) == doctest::Approx(2.0));
    CHECK(vg.grad(1) == doctest::Approx(-4.0));
}

TEST_CASE("grad of a constant objective is zero") {
    ad::ScalarFunction f;
    f.input_length = 3;
    f.build = [](ad::Tape& tape, ad::NodeId) {
        return tape.sum(tape.constant(Eigen::MatrixXd::Ones(2, 2)));
    };
    const Eigen::VectorXd g = ad::grad(f, Eigen::VectorXd::Ones(3));
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grad is linear in the objective") {
    Rng rng(64);
    const Eigen::MatrixXd q1 = random_matrix(rng, 4, 4);
    const Eigen::MatrixXd q2 = random_matrix(rng, 4, 4);
    const double a = 1.7, b = -0.3;

    const auto quad = [](ad::Tape& tape, ad::NodeId v, const Eigen::MatrixXd& q) {
        const ad::NodeId qv = tape.matmul(tape.constant(q), v);
        return tape.sum(tape.hadamard(v, qv));
    };

    Eigen::VectorXd point(4);
    for (int i = 0; i < 4; ++i) point(i) = rng.normal();

    ad::ScalarFunction f1{4, [&](ad::Tape& t, ad::NodeId v) { return quad(t, v, q1); }};
    ad::ScalarFunction f2{4, [&](ad::Tape& t, ad::NodeId v) { return quad(t, v, q2); }};
    ad::ScalarFunction combo{4, [&](ad::Tape& t, ad::NodeId v) {
                                 return t.add(t.scale(quad(t, v, q1), a), t.scale(quad(t, v, q2), b));
                             }};
    const Eigen::VectorXd g1 = ad::grad(f1, point);
    const Eigen::VectorXd g2 = ad::grad(f2, point);
    const Eigen::VectorXd gc = ad::grad(combo, point);
    CHECK(tad_test::rel_err(gc, a * g1 + b * g2) <= 1e-10);
}

TEST_CASE("per-op finite-difference checks") {
    Rng rng(5150);

    SUBCASE("add/sub/scale") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                const ad::NodeId c = t.constant(Eigen::MatrixXd::Constant(3, 2, 0.7));
                return t.norm_sq(t.scale(t.sub(t.add(v, c), t.scale(v, 0.25)), 1.5));
            },
            3, 2, 1);
    }
    SUBCASE("hadamard") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                return t.sum(t.hadamard(v, t.hadamard(v, v)));
            },
            2, 3, 2);
    }
    SUBCASE("log") {
        check_op([&](ad::Tape& t, ad::NodeId v) { return t.sum(t.log(v)); }, 2, 2, 3, 1e-6, 4.0);
    }
    SUBCASE("tanh") {
        check_op([&](ad::Tape& t, ad::NodeId v) { return t.norm_sq(t.tanh(v)); }, 3, 3, 4);
    }
    SUBCASE("matmul left and right") {
        Eigen::MatrixXd other = random_matrix(rng, 3, 4);
        check_op([&](ad::Tape& t, ad::NodeId v) { return t.norm_sq(t.matmul(v, t.constant(other))); },
                 2, 3, 5);
        check_op([&](ad::Tape& t, ad::NodeId v) { return t.norm_sq(t.matmul(t.constant(other), v)); },
                 4, 2, 6);
    }
    SUBCASE("matmul_tn both sides") {
        Eigen::MatrixXd other = random_matrix(rng, 3, 2);
        check_op(
            [&](ad::Tape& t, ad::NodeId v) { return t.norm_sq(t.matmul_tn(v, t.constant(other))); },
            3, 4, 7);
        check_op(
            [&](ad::Tape& t, ad::NodeId v) { return t.norm_sq(t.matmul_tn(t.constant(other), v)); },
            3, 4, 8);
    }
    SUBCASE("affine in x, w, and b") {
        Eigen::MatrixXd x = random_matrix(rng, 4, 3);
        Eigen::MatrixXd w = random_matrix(rng, 2, 3);
        Eigen::MatrixXd bias = random_matrix(rng, 1, 2);
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                return t.norm_sq(t.affine(v, t.constant(w), t.constant(bias)));
            },
            4, 3, 9);
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                return t.norm_sq(t.affine(t.constant(x), v, t.constant(bias)));
            },
            2, 3, 10);
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                return t.norm_sq(t.affine(t.constant(x), t.constant(w), v));
            },
            1, 2, 11);
    }
    SUBCASE("softmax") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                const ad::NodeId p = t.softmax(v);
                const ad::NodeId target = t.constant(Eigen::MatrixXd::Constant(3, 3, 0.2));
                return t.norm_sq(t.sub(p, target));
            },
            3, 3, 12);
    }
    SUBCASE("norm_sq/sum/col_sum") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                const ad::NodeId cs = t.col_sum(v);
                return t.add(t.norm_sq(cs), t.scale(t.sum(v), 0.5));
            },
            3, 4, 13);
    }
    SUBCASE("pick and block") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                const ad::NodeId blk = t.block(v, 1, 1, 2, 2);
                return t.add(t.norm_sq(blk), t.pick(v, 0, 0));
            },
            4, 4, 14);
    }
    SUBCASE("reshape") {
        check_op(
            [&](ad::Tape& t, ad::NodeId v) {
                const ad::NodeId flat = t.reshape(v, 6, 1);
                return t.norm_sq(t.tanh(flat));
            },
            2, 3, 15);
    }
}

TEST_CASE("composite chains keep gradients exact") {
    // softmax . affine . tanh, probed through a CE-shaped readout.
    check_op(
        [&](ad::Tape& t, ad::NodeId v) {
            const ad::NodeId h = t.tanh(v);
            Eigen::MatrixXd w(2, 3), bias(1, 2);
            w << 0.3, -0.4, 1.1, 0.9, 0.2, -0.5;
            bias << 0.05, -0.1;
            const ad::NodeId p = t.softmax(t.affine(h, t.constant(w), t.constant(bias)));
            return t.scale(t.log(t.pick(p, 0, 1)), -1.0);
        },
        4, 3, 16, 1e-6);
}

TEST_CASE("tape value bookkeeping and errors") {
    ad::Tape tape;
    const ad::NodeId a = tape.input(Eigen::MatrixXd::Ones(2, 2));
    const ad::NodeId b = tape.constant(2.0 * Eigen::MatrixXd::Ones(2, 2));
    const ad::NodeId s = tape.sum(tape.hadamard(a, b));
    CHECK(tape.scalar(s) == doctest::Approx(8.0));
    CHECK_THROWS_AS(tape.scalar(a), ShapeError);
    CHECK_THROWS_AS((void)tape.gradient(a), InvalidSpecError);  // before backward
    tape.backward(s);
    CHECK(tape.gradient(a)(0, 0) == doctest::Approx(2.0));

    ad::Tape bad;
    const ad::NodeId x = bad.input(Eigen::MatrixXd::Constant(1, 1, 1e308));
    try {
        (void)bad.hadamard(x, x);  // overflows to inf
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.op_index >= 0);
    }

    ad::Tape mism;
    const ad::NodeId p = mism.input(Eigen::MatrixXd::Ones(2, 2));
    const ad::NodeId q = mism.input(Eigen::MatrixXd::Ones(3, 2));
    CHECK_THROWS_AS((void)mism.add(p, q), ShapeError);
    CHECK_THROWS_AS((void)mism.matmul(p, q), ShapeError);

    ad::ScalarFunction f{4, [](ad::Tape& t, ad::NodeId v) { return t.norm_sq(v); }};
    CHECK_THROWS_AS((void)ad::grad(f, Eigen::VectorXd::Ones(3)), ShapeError);
}
