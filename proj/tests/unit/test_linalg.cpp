#include "helpers.hpp"

#include <cmath>

using namespace tapkit;
using tapkit::testing::random_matrix;
using tapkit::testing::throws_kind;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Scalarizes any matrix-valued op with fixed random left/right weights so
// every output entry influences the loss differently.
ad::Var scalarize(ad::Tape& tape, ad::Var y, std::uint64_t seed) {
    Rng rng(seed);
    ad::Var left = tape.constant(random_matrix(1, y.rows(), rng));
    ad::Var right = tape.constant(random_matrix(y.cols(), 1, rng));
    return ad::matmul(ad::matmul(left, y), right);
}

using UnaryOp = std::function<ad::Var(ad::Var)>;
using BinaryOp = std::function<ad::Var(ad::Var, ad::Var)>;

double check_unary(const UnaryOp& op, Matrix x) {
    std::vector<Matrix*> params{&x};
    DiffFn fn = [&](std::vector<Matrix>* grads) {
        ad::Tape tape;
        ad::Var xv = tape.variable(x);
        ad::Var loss = scalarize(tape, op(xv), 99);
        if (grads) {
            tape.backward(loss);
            *grads = {xv.grad()};
        }
        return loss.value()(0, 0);
    };
    return grad_check(fn, params, 1e-6).max_rel_error;
}

double check_binary(const BinaryOp& op, Matrix a, Matrix b) {
    std::vector<Matrix*> params{&a, &b};
    DiffFn fn = [&](std::vector<Matrix>* grads) {
        ad::Tape tape;
        ad::Var av = tape.variable(a), bv = tape.variable(b);
        ad::Var loss = scalarize(tape, op(av, bv), 77);
        if (grads) {
            tape.backward(loss);
            *grads = {av.grad(), bv.grad()};
        }
        return loss.value()(0, 0);
    };
    return grad_check(fn, params, 1e-6).max_rel_error;
}

} // namespace

TEST(Matrix, ConstructionAndShape) {
    Matrix m(2, 3, 1.5);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m.size(), 6u);
    EXPECT_EQ(m(1, 2), 1.5);
    EXPECT_EQ(m.shape_string(), "(2x3)");
    EXPECT_TRUE(throws_kind([] { Matrix(2, 2, std::vector<double>{1, 2, 3}); }, ErrorKind::dimension));
    EXPECT_TRUE(throws_kind([] { Matrix a(2, 2), b(2, 3); a += b; }, ErrorKind::dimension));
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
    Rng rng(1);
    const Matrix b = random_matrix(3, 4, rng);
    EXPECT_EQ(matmul(Matrix::identity(3), b), b);
}

TEST(Matmul, HandTraced) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{0}, {1}};
    EXPECT_EQ(matmul(a, b), (Matrix{{2}, {4}}));
}

TEST(Matmul, AgreesWithTripleLoop) {
    Rng rng(2);
    const Matrix a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
    EXPECT_LE(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
    EXPECT_LE(max_abs_diff(matmul_tn(transpose(a), b), naive_matmul(a, b)), 1e-12);
    EXPECT_LE(max_abs_diff(matmul_nt(a, transpose(b)), naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dimension);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2x3)"), std::string::npos);
        EXPECT_NE(msg.find("(4x5)"), std::string::npos);
    }
}

TEST(Matmul, AssociativeOnRandomTriples) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 1 + uniform_index(rng, 0, 5), q = 1 + uniform_index(rng, 0, 5);
        const std::size_t r = 1 + uniform_index(rng, 0, 5), s = 1 + uniform_index(rng, 0, 5);
        const Matrix a = random_matrix(p, q, rng), b = random_matrix(q, r, rng), c = random_matrix(r, s, rng);
        EXPECT_LE(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9);
    }
}

TEST(Softmax, ZeroRowIsUniform) {
    const Matrix s = softmax_rows(Matrix(1, 4));
    for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    const Matrix s = softmax_rows(Matrix{{1000.0, 0.0}});
    EXPECT_TRUE(s.all_finite());
    EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
    EXPECT_LT(s(0, 1), 1e-300);
}

TEST(Softmax, MatchesDirectFormula) {
    Rng rng(4);
    const Matrix m = random_matrix(6, 9, rng, 5.0);
    const Matrix s = softmax_rows(m);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double mx = m(r, 0);
        for (std::size_t c = 1; c < m.cols(); ++c) mx = std::max(mx, m(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) z += std::exp(m(r, c) - mx);
        for (std::size_t c = 0; c < m.cols(); ++c) EXPECT_NEAR(s(r, c), std::exp(m(r, c) - mx) / z, 1e-12);
    }
}

TEST(Softmax, RowsStochasticAndShiftInvariant) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix m = random_matrix(3, 1 + uniform_index(rng, 0, 10), rng, 50.0);
        const Matrix s = softmax_rows(m);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double sum = 0.0;
            for (double v : s.row(r)) {
                EXPECT_GE(v, 0.0);
                sum += v;
            }
            EXPECT_NEAR(sum, 1.0, 1e-9);
        }
        const double shift = uniform(rng, -100.0, 100.0);
        for (std::size_t c = 0; c < m.cols(); ++c) m(1, c) += shift;
        EXPECT_LE(max_abs_diff(softmax_rows(m), s), 1e-12);
    }
}

TEST(Linear, IdentityWeightNoBias) {
    Rng rng(6);
    const Matrix x = random_matrix(4, 3, rng);
    EXPECT_EQ(linear(x, Matrix::identity(3)), x);
}

TEST(Linear, ZeroInputYieldsBias) {
    Rng rng(7);
    const Matrix b = random_matrix(1, 5, rng);
    const Matrix y = linear(Matrix(3, 4), random_matrix(4, 5, rng), b);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(y(r, c), b(0, c));
}

TEST(Linear, MatchesComposedOracle) {
    Rng rng(8);
    const Matrix x = random_matrix(5, 4, rng), w = random_matrix(4, 3, rng), b = random_matrix(1, 3, rng);
    Matrix expect = naive_matmul(x, w);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 3; ++c) expect(r, c) += b(0, c);
    EXPECT_LE(max_abs_diff(linear(x, w, b), expect), 1e-12);
    EXPECT_TRUE(throws_kind([&] { linear(x, Matrix(3, 3)); }, ErrorKind::dimension));
    EXPECT_TRUE(throws_kind([&] { linear(x, w, Matrix(1, 4)); }, ErrorKind::dimension));
}

TEST(Argmax, FirstMaximumWins) {
    const std::vector<double> v{0.1, 0.4, 0.4, 0.1};
    EXPECT_EQ(argmax(v), 1u);
}

TEST(GradCheck, Quadratic) {
    Matrix theta{{1.0, 2.0}};
    std::vector<Matrix*> params{&theta};
    DiffFn fn = [&](std::vector<Matrix>* grads) {
        if (grads) *grads = {theta * 2.0};
        return theta[0] * theta[0] + theta[1] * theta[1];
    };
    const auto rep = grad_check(fn, params, 1e-5);
    EXPECT_LE(rep.max_rel_error, 1e-8);
    EXPECT_EQ(rep.entries_checked, 2u);
    EXPECT_EQ(theta, (Matrix{{1.0, 2.0}})); // restored
}

TEST(GradCheck, ConstantLossHasZeroError) {
    Matrix theta(2, 2, 3.0);
    std::vector<Matrix*> params{&theta};
    DiffFn fn = [&](std::vector<Matrix>* grads) {
        if (grads) *grads = {Matrix(2, 2)};
        return 4.0;
    };
    EXPECT_EQ(grad_check(fn, params, 1e-5).max_rel_error, 0.0);
}

TEST(GradCheck, RejectsBadEpsAndNonFiniteLoss) {
    Matrix theta{{0.5, 1e-6}};
    std::vector<Matrix*> params{&theta};
    DiffFn fn = [&](std::vector<Matrix>* grads) {
        if (grads) *grads = {Matrix(1, 2)};
        return theta[1] < 0.0 ? std::log(theta[1]) : 0.0;
    };
    EXPECT_TRUE(throws_kind([&] { grad_check(fn, params, 0.0); }, ErrorKind::input));
    try {
        grad_check(fn, params, 1e-5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
        EXPECT_NE(std::string(e.what()).find("entry 1"), std::string::npos);
    }
}

TEST(Autodiff, EveryOpPassesGradCheck) {
    Rng rng(9);
    const Matrix x = random_matrix(4, 3, rng);
    EXPECT_LT(check_binary([](ad::Var a, ad::Var b) { return ad::matmul(a, b); }, x, random_matrix(3, 5, rng)), 1e-6);
    EXPECT_LT(check_binary([](ad::Var a, ad::Var b) { return ad::matmul_nt(a, b); }, x, random_matrix(6, 3, rng)), 1e-6);
    EXPECT_LT(check_binary([](ad::Var a, ad::Var b) { return ad::add(a, b); }, x, random_matrix(4, 3, rng)), 1e-6);
    EXPECT_LT(check_binary([](ad::Var a, ad::Var b) { return ad::add_row(a, b); }, x, random_matrix(1, 3, rng)), 1e-6);
    EXPECT_LT(check_binary([](ad::Var a, ad::Var b) { return ad::concat_cols(a, b); }, x, random_matrix(4, 2, rng)), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::scale(a, -2.5); }, x), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::softmax_rows(a); }, x), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::mean_rows(a); }, x), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::layer_norm_rows(a); }, x), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::unfold_time(a, 3); }, random_matrix(5, 2, rng)), 1e-6);
    EXPECT_LT(check_unary([](ad::Var a) { return ad::cross_entropy_rows(a, {0, 2, 1, 2}); }, x), 1e-6);
    // keep entries away from the kink
    Matrix away = x;
    for (double& v : away.data()) v += v >= 0 ? 0.1 : -0.1;
    EXPECT_LT(check_unary([](ad::Var a) { return ad::relu(a); }, away), 1e-6);
}

TEST(Autodiff, SharedInputsAccumulate) {
    ad::Tape tape;
    ad::Var x = tape.variable(Matrix{{3.0}});
    ad::Var y = ad::matmul(x, x); // x^2
    ad::Var z = ad::add(y, x);    // x^2 + x
    tape.backward(z);
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Autodiff, TraversalOrderDoesNotChangeGradients) {
    Rng rng(10);
    const Matrix a0 = random_matrix(5, 4, rng), w0 = random_matrix(4, 4, rng), b0 = random_matrix(1, 4, rng);
    auto run = [&](ad::Traversal order) {
        ad::Tape tape;
        ad::Var a = tape.variable(a0), w = tape.variable(w0), b = tape.variable(b0);
        ad::Var h = ad::relu(ad::linear(a, w, b));
        ad::Var s = ad::softmax_rows(ad::matmul(h, w));
        ad::Var mixed = ad::add(ad::matmul_nt(s, h), ad::matmul_nt(h, s));
        ad::Var loss = scalarize(tape, ad::concat_cols(mixed, ad::layer_norm_rows(h)), 5);
        tape.backward(loss, order);
        return std::vector<Matrix>{a.grad(), w.grad(), b.grad()};
    };
    const auto g1 = run(ad::Traversal::reverse_creation);
    const auto g2 = run(ad::Traversal::depth_first);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]); // bitwise
}

TEST(Autodiff, UnusedVariableGetsZeroGradient) {
    ad::Tape tape;
    ad::Var x = tape.variable(Matrix{{1.0, 2.0}});
    ad::Var unused = tape.variable(Matrix(2, 2, 1.0));
    tape.backward(ad::matmul(x, tape.constant(Matrix{{1.0}, {1.0}})));
    EXPECT_EQ(unused.grad(), Matrix(2, 2));
    EXPECT_EQ(x.grad(), (Matrix{{1.0, 1.0}}));
}

TEST(Autodiff, BackwardNeedsScalarRoot) {
    ad::Tape tape;
    ad::Var x = tape.variable(Matrix(2, 2));
    EXPECT_TRUE(throws_kind([&] { tape.backward(x); }, ErrorKind::dimension));
}

TEST(Autodiff, UnfoldTimeReplicatesEdges) {
    ad::Tape tape;
    ad::Var x = tape.constant(Matrix{{1.0}, {2.0}, {3.0}});
    const Matrix u = ad::unfold_time(x, 3).value();
    EXPECT_EQ(u, (Matrix{{1, 1, 2}, {1, 2, 3}, {2, 3, 3}}));
    EXPECT_TRUE(throws_kind([&] { ad::unfold_time(x, 2); }, ErrorKind::input));
}

TEST(Autodiff, CrossEntropyRejectsBadLabel) {
    ad::Tape tape;
    ad::Var z = tape.constant(Matrix(2, 3));
    EXPECT_TRUE(throws_kind([&] { ad::cross_entropy_rows(z, {0, 3}); }, ErrorKind::input));
    EXPECT_NEAR(ad::cross_entropy_rows(z, {0, 1}).value()(0, 0), std::log(3.0), 1e-12);
}
