#include "doctest.h"

#include <cmath>
#include <vector>

#include "moesurv/autodiff.hpp"
#include "moesurv/error.hpp"
#include "moesurv/rng.hpp"
#include "support/gradcheck.hpp"

using namespace moesurv;
using namespace moesurv::ad;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("matmul values") {
    Graph g;
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    Matrix ones(2, 1);
    ones << 1, 1;
    Matrix id = Matrix::Identity(2, 2);
    CHECK(matmul(g.constant(id), g.constant(m)).value() == m);
    Matrix expect(2, 1);
    expect << 3, 7;
    CHECK(matmul(g.constant(m), g.constant(ones)).value() == expect);
    CHECK_THROWS_AS(matmul(g.constant(ones), g.constant(ones)), ConfigError);
}

TEST_CASE("gradient of sum(A B) is the row-broadcast of B's row sums") {
    Rng rng(3);
    ParameterStore store;
    Parameter& a = store.add("a", random_matrix(rng, 3, 4));
    const Matrix b = random_matrix(rng, 4, 2);
    Graph g;
    g.backward(sum(matmul(g.parameter(a), g.constant(b))));
    const Eigen::RowVectorXd row = b.rowwise().sum().transpose();
    for (Eigen::Index i = 0; i < 3; ++i) CHECK((a.grad.row(i) - row).cwiseAbs().maxCoeff() < 1e-14);

    const auto fd = testing::check_parameter_gradients(
        store, [&](Graph& h) { return sum(matmul(h.parameter(store.at("a")), h.constant(b))); });
    CHECK(fd.max_rel_error < 1e-6);
}

TEST_CASE("elementwise activations") {
    Graph g;
    CHECK(relu(g.scalar(-3)).item() == 0.0);
    CHECK(sigmoid(g.scalar(0)).item() == 0.5);
    CHECK_THROWS_AS(log(g.scalar(0.0)), NumericDomainError);
    CHECK_THROWS_AS(log(g.scalar(-1.0)), NumericDomainError);

    ParameterStore store;
    Parameter& x = store.add("x", Matrix::Constant(1, 1, 2.0));
    Graph h;
    h.backward(log(h.parameter(x)));
    CHECK(x.grad(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax rows") {
    Graph g;
    Matrix zeros = Matrix::Zero(1, 4);
    Var s = softmax_rows(g.constant(zeros));
    for (int k = 0; k < 4; ++k) CHECK(s.value()(0, k) == 0.25);

    Matrix big(1, 2);
    big << 1000, 0;
    Var t = softmax_rows(g.constant(big));
    CHECK(std::isfinite(t.value()(0, 1)));
    CHECK(std::abs(t.value()(0, 0) - 1.0) < 1e-9);
    CHECK(std::abs(t.value()(0, 1)) < 1e-9);

    Matrix bad = Matrix::Zero(1, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(softmax_rows(g.constant(bad)), NumericDomainError);
    bad(0, 1) = INFINITY;
    CHECK_THROWS_AS(softmax_rows(g.constant(bad)), NumericDomainError);
}

TEST_CASE("softmax gradient against finite differences") {
    Rng rng(11);
    ParameterStore store;
    store.add("logits", random_matrix(rng, 3, 4));
    const Matrix w = random_matrix(rng, 3, 4);
    const auto fd = testing::check_parameter_gradients(store, [&](Graph& g) {
        return sum(square(softmax_rows(g.parameter(store.at("logits"))) * g.constant(w)));
    });
    CHECK(fd.max_rel_error < 1e-4);
}

TEST_CASE("backward seeds") {
    ParameterStore store;
    Parameter& a = store.add("a", Matrix::Constant(2, 3, 0.7));
    Parameter& x = store.add("x", Matrix::Constant(1, 1, 3.0));
    {
        Graph g;
        g.backward(sum(g.parameter(a)));
        CHECK(a.grad == Matrix::Ones(2, 3));
    }
    {
        Graph g;
        g.backward(square(g.parameter(x)));
        CHECK(x.grad(0, 0) == 6.0);
    }
    Graph g;
    CHECK_THROWS_AS(g.backward(g.parameter(a)), UsageError);
}

TEST_CASE("two-layer MLP loss against finite differences") {
    Rng rng(5);
    ParameterStore store;
    store.add("w0", random_matrix(rng, 4, 6) * 0.5);
    store.add("b0", random_matrix(rng, 1, 6) * 0.1);
    store.add("w1", random_matrix(rng, 6, 1) * 0.5);
    store.add("b1", random_matrix(rng, 1, 1) * 0.1);
    const Matrix x = random_matrix(rng, 7, 4);
    const Matrix y = random_matrix(rng, 7, 1);
    const auto fd = testing::check_parameter_gradients(store, [&](Graph& g) {
        Var h = relu(matmul(g.constant(x), g.parameter(store.at("w0"))) + g.parameter(store.at("b0")));
        Var out = matmul(h, g.parameter(store.at("w1"))) + g.parameter(store.at("b1"));
        return mean(square(out - g.constant(y)));
    });
    CHECK(fd.max_rel_error < 1e-4);
}

TEST_CASE("shape and survival ops against finite differences") {
    Rng rng(9);
    ParameterStore store;
    store.add("a", random_matrix(rng, 3, 2));
    store.add("c", random_matrix(rng, 4, 2));
    store.add("h", (random_matrix(rng, 3, 4).array() * 0.3 + 0.5).matrix());
    const std::vector<int> cols = {1, 3, 0};
    const auto fd = testing::check_parameter_gradients(store, [&](Graph& g) {
        Var a = g.parameter(store.at("a"));
        Var c = g.parameter(store.at("c"));
        Var h = g.parameter(store.at("h"));
        Var pairs = pair_sum(a, c);
        Var explicit_pairs = repeat_rows(a, 4) + tile_rows(c, 3);
        Var rows = unflatten(sum_rows(pairs * explicit_pairs), 3, 4);
        Var surv = cumprod_rows(add_scalar(neg(h), 1.0));
        Var picked = gather_cols(shift_right(surv, 1.0), cols);
        Var blocks = concat_cols(std::vector<Var>{col_block(rows, 1, 2), row_block(rows, 0, 3)});
        return mean(blocks) + sum(log(clamp_min(picked, 1e-12))) + sum(mean_cols(scale(rows * h, 0.5)));
    });
    CHECK(fd.max_rel_error < 1e-4);
}

TEST_CASE("pair_sum equals repeat plus tile") {
    Rng rng(1);
    Graph g;
    Var a = g.constant(random_matrix(rng, 3, 5));
    Var c = g.constant(random_matrix(rng, 4, 5));
    CHECK((pair_sum(a, c).value() - (repeat_rows(a, 4) + tile_rows(c, 3)).value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("broadcasting binary ops") {
    Graph g;
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    Matrix row(1, 3);
    row << 10, 20, 30;
    Matrix col(2, 1);
    col << 100, 200;
    CHECK((g.constant(m) + g.constant(row)).value()(1, 2) == 36);
    CHECK((g.constant(m) * g.constant(col)).value()(1, 0) == 800);
    CHECK((g.constant(m) - g.scalar(1)).value()(0, 0) == 0);
    CHECK_THROWS_AS(g.constant(m) + g.constant(Matrix::Zero(3, 2)), ConfigError);
}
