// SPDX-License-Identifier: Apache-2.0
//
// Tensor engine tests: per-op examples against hand/closed-form oracles and
// finite-difference checks of every differentiable operation.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "llast/gradcheck.hpp"
#include "llast/graph.hpp"

using namespace llast;

namespace {

template <typename S>
Parameter<S> make_param(std::string name, Shape shape, std::vector<S> data) {
    Parameter<S> p;
    p.name = std::move(name);
    p.value = Tensor<S>(std::move(shape), std::move(data));
    return p;
}

Parameter<double> random_param(std::string name, Shape shape, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Parameter<double> p;
    p.name = std::move(name);
    p.value = Tensor<double>::randn(std::move(shape), rng, scale);
    return p;
}

}  // namespace

TEST_CASE("tensor shape contract") {
    Tensor<float> t({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({2}, {1.f, 2.f, 3.f}), ShapeError);
    CHECK(shape_str({2, 3}) == "[2 x 3]");
}

TEST_CASE("matmul examples") {
    Graph<float> g;
    // identity case
    auto eye = g.input(Tensor<float>({2, 2}, {1, 0, 0, 1}));
    auto m = g.input(Tensor<float>({2, 2}, {1, 2, 3, 4}));
    auto prod = g.matmul(eye, m);
    CHECK(g.value(prod).vec() == std::vector<float>{1, 2, 3, 4});

    // hand inner product
    auto a = g.input(Tensor<float>({1, 2}, {1, 2}));
    auto b = g.input(Tensor<float>({2, 1}, {3, 4}));
    CHECK(g.value(g.matmul(a, b)).at(0) == doctest::Approx(11.0));

    // mismatch names both shapes
    auto x = g.input(Tensor<float>({2, 3}));
    auto y = g.input(Tensor<float>({4, 5}));
    CHECK_THROWS_WITH_AS(g.matmul(x, y), "matmul shape mismatch: [2 x 3] vs [4 x 5]", ShapeError);
}

TEST_CASE("softmax examples") {
    Graph<double> g;
    auto sym = g.softmax(g.input(Tensor<double>({2}, {0, 0})), 0);
    CHECK(g.value(sym).at(0) == doctest::Approx(0.5));
    CHECK(g.value(sym).at(1) == doctest::Approx(0.5));

    // closed-form exp/sum
    auto r = g.softmax(g.input(Tensor<double>({3}, {1, 2, 3})), 0);
    CHECK(g.value(r).at(0) == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(g.value(r).at(1) == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(g.value(r).at(2) == doctest::Approx(0.66524).epsilon(1e-4));

    // max-subtraction keeps huge logits finite
    auto big = g.softmax(g.input(Tensor<double>({2}, {1000, 0})), 0);
    CHECK(g.value(big).at(0) == doctest::Approx(1.0));
    CHECK(std::isfinite(g.value(big).at(1)));

    // outputs sum to 1 for any finite input
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Graph<double> g2;
        auto t = g2.softmax(g2.input(Tensor<double>::randn({4, 5}, rng, 10.0)), 1);
        for (int64_t row = 0; row < 4; ++row) {
            double s = 0;
            for (int64_t c = 0; c < 5; ++c) s += g2.value(t).at(row, c);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("masked cross entropy examples") {
    // uniform logits over V=4, two masked positions -> ln 4
    Graph<double> g;
    auto logits = g.input(Tensor<double>({3, 4}));
    auto loss = g.masked_cross_entropy(logits, {0, 1, 2}, {1, 0, 1});
    CHECK(g.value(loss).at(0) == doctest::Approx(std::log(4.0)).epsilon(1e-9));

    // near-one-hot logits -> loss near 0
    Graph<double> g2;
    Tensor<double> sharp({2, 4});
    sharp.at(0, 1) = 1e4;
    sharp.at(1, 2) = 1e4;
    auto l2 = g2.masked_cross_entropy(g2.input(sharp), {1, 2}, {1, 1});
    CHECK(g2.value(l2).at(0) == doctest::Approx(0.0).epsilon(1e-9));

    // changing a target under a masked-out position changes nothing
    Rng rng(3);
    Tensor<double> rnd = Tensor<double>::randn({4, 5}, rng);
    Graph<double> g3, g4;
    auto a = g3.masked_cross_entropy(g3.input(rnd), {1, 2, 3, 4}, {1, 0, 1, 0});
    auto b = g4.masked_cross_entropy(g4.input(rnd), {1, 0, 3, 1}, {1, 0, 1, 0});
    CHECK(g3.value(a).at(0) == g4.value(b).at(0));

    // all-false mask is degenerate
    Graph<double> g5;
    CHECK_THROWS_AS(g5.masked_cross_entropy(g5.input(rnd), {0, 0, 0, 0}, {0, 0, 0, 0}), DegenerateBatchError);
}

TEST_CASE("backward basics") {
    // loss = sum(w) -> grad all ones
    auto w = make_param<double>("w", {3}, {5, -1, 2});
    {
        Graph<double> g;
        auto loss = g.sum(g.param(w));
        g.backward(loss);
        CHECK(w.grad.vec() == std::vector<double>{1, 1, 1});
    }

    // loss = sum(w^2), w=[1,2] -> grad [2,4]
    auto w2 = make_param<double>("w2", {2}, {1, 2});
    {
        Graph<double> g;
        auto p = g.param(w2);
        auto loss = g.sum(g.mul(p, p));
        g.backward(loss);
        CHECK(w2.grad.vec() == std::vector<double>{2, 4});
    }

    // frozen parameter in the loss path gets no grad
    auto frozen = make_param<double>("frozen", {2}, {1, 1});
    frozen.trainable = false;
    {
        Graph<double> g;
        auto loss = g.sum(g.param(frozen));
        g.backward(loss);
        CHECK_FALSE(frozen.has_grad());
    }

    // backward twice without re-forward is a stale tape
    auto w3 = make_param<double>("w3", {2}, {1, 1});
    {
        Graph<double> g;
        auto loss = g.sum(g.param(w3));
        g.backward(loss);
        CHECK_THROWS_AS(g.backward(loss), StaleTapeError);
    }

    // a loss not involving p leaves p.grad absent
    auto used = make_param<double>("used", {2}, {1, 2});
    auto unused = make_param<double>("unused", {2}, {3, 4});
    {
        Graph<double> g;
        auto pu = g.param(used);
        g.param(unused);
        g.backward(g.sum(pu));
        CHECK(used.has_grad());
        CHECK_FALSE(unused.has_grad());
    }
}

TEST_CASE("gradient accumulates additively across uses and backwards") {
    auto w = make_param<double>("w", {2}, {1.0, 2.0});
    {
        Graph<double> g;
        auto p = g.param(w);
        // w appears twice: loss = sum(w) + sum(w)
        auto loss = g.add(g.sum(p), g.sum(p));
        g.backward(loss);
        CHECK(w.grad.vec() == std::vector<double>{2, 2});
    }
    {
        Graph<double> g;
        g.backward(g.sum(g.param(w)));
        CHECK(w.grad.vec() == std::vector<double>{3, 3});  // not cleared between passes
    }
    w.zero_grad();
    CHECK_FALSE(w.has_grad());
}

TEST_CASE("finite difference check examples") {
    // quadratic: exact for central differences up to rounding
    auto w = random_param("w", {4}, 11);
    auto quad = [&](Graph<double>& g) {
        auto p = g.param(w);
        return g.sum(g.mul(p, p));
    };
    auto res = finite_difference_check({&w}, quad, 1e-5);
    CHECK(res.max_rel_err < 1e-8);

    // constant function: both gradients zero
    auto c = random_param("c", {3}, 12);
    auto constant = [&](Graph<double>& g) {
        g.param(c);
        return g.sum(g.input(Tensor<double>({1}, {2.5})));
    };
    CHECK(finite_difference_check({&c}, constant, 1e-5).max_rel_err == 0.0);
}

TEST_CASE("finite difference over every op, 10 seeds") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto a = random_param("a", {3, 4}, 100 + seed);
        auto b = random_param("b", {4, 5}, 200 + seed);
        auto bias = random_param("bias", {5}, 300 + seed);
        auto gain = random_param("gain", {4}, 400 + seed, 0.5);
        auto gbias = random_param("gbias", {4}, 500 + seed, 0.5);
        auto table = random_param("table", {6, 3}, 600 + seed);

        std::vector<Parameter<double>*> params = {&a, &b, &bias, &gain, &gbias, &table};
        auto build = [&](Graph<double>& g) {
            auto an = g.param(a);
            auto bn = g.param(b);
            auto mm = g.matmul(an, bn);                       // matmul
            auto biased = g.add(mm, g.param(bias));           // add with [5] broadcast
            auto soft = g.softmax(biased, 1);                 // softmax
            auto act = g.gelu(g.layer_norm(an, g.param(gain), g.param(gbias)));  // layer_norm + gelu
            auto tr = g.transpose(act);                       // transpose [4 x 3]
            auto emb = g.embedding(g.param(table), {1, 4, 1});  // embedding with repeated id
            auto cat = g.concat({tr, emb}, 0);                // concat [7 x 3]
            auto sl = g.slice(cat, 0, 2, 4);                  // slice
            auto rs = g.reshape(sl, {2, 6});                  // reshape
            auto prod = g.mul(rs, g.scale(rs, 0.5));          // mul + scale
            auto ce = g.masked_cross_entropy(soft, {1, 2, 0}, {1, 0, 1});
            return g.add(g.mean(prod), g.add(g.sum(soft), g.add(ce, g.mean(sl))));
        };
        auto res = finite_difference_check(params, build, 1e-4);
        INFO("seed ", seed, " worst ", res.worst_param, "[", res.worst_index, "]");
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("per-op value examples") {
    Graph<double> g;

    // layer_norm: constant rows normalize to zero, so output is the bias
    auto ln = g.layer_norm(g.input(Tensor<double>({2, 3}, {5, 5, 5, -2, -2, -2})),
                           g.input(Tensor<double>({3}, {2, 2, 2})), g.input(Tensor<double>({3}, {0.5, 0.5, 0.5})));
    for (int64_t i = 0; i < 6; ++i) CHECK(g.value(ln).at(i) == doctest::Approx(0.5));

    // layer_norm over [1, 2, 3]: mean 2, rstd vs population variance 2/3
    auto ln2 = g.layer_norm(g.input(Tensor<double>({3}, {1, 2, 3})), g.input(Tensor<double>::full({3}, 1.0)),
                            g.input(Tensor<double>({3})));
    double rstd = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
    CHECK(g.value(ln2).at(0) == doctest::Approx(-rstd).epsilon(1e-9));
    CHECK(g.value(ln2).at(1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g.value(ln2).at(2) == doctest::Approx(rstd).epsilon(1e-9));

    // gelu: 0 -> 0 and the erf closed form at 1
    auto ge = g.gelu(g.input(Tensor<double>({2}, {0.0, 1.0})));
    CHECK(g.value(ge).at(0) == 0.0);
    CHECK(g.value(ge).at(1) == doctest::Approx(0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)))).epsilon(1e-12));

    // embedding: plain row gather with repeats
    auto table = g.input(Tensor<double>({3, 2}, {10, 11, 20, 21, 30, 31}));
    auto emb = g.embedding(table, {2, 0, 2});
    CHECK(g.value(emb).vec() == std::vector<double>{30, 31, 10, 11, 30, 31});
    CHECK_THROWS_AS(g.embedding(table, {3}), ShapeError);

    // transpose twice is identity; single transpose swaps coordinates
    auto m = g.input(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto tr = g.transpose(m);
    CHECK(g.value(tr).vec() == std::vector<double>{1, 4, 2, 5, 3, 6});
    CHECK(g.value(g.transpose(tr)).vec() == g.value(m).vec());

    // concat along both axes, slice undoes it
    auto a = g.input(Tensor<double>({1, 2}, {1, 2}));
    auto b = g.input(Tensor<double>({1, 2}, {3, 4}));
    auto rows = g.concat({a, b}, 0);
    CHECK(g.value(rows).vec() == std::vector<double>{1, 2, 3, 4});
    auto cols = g.concat({a, b}, 1);
    CHECK(g.value(cols).vec() == std::vector<double>{1, 2, 3, 4});
    CHECK(g.value(cols).shape() == Shape{1, 4});
    CHECK(g.value(g.slice(rows, 0, 1, 1)).vec() == std::vector<double>{3, 4});
    CHECK(g.value(g.slice(cols, 1, 1, 2)).vec() == std::vector<double>{2, 3});
    CHECK_THROWS_AS(g.slice(rows, 0, 1, 2), ShapeError);

    // reshape preserves row-major order
    auto rs = g.reshape(m, {3, 2});
    CHECK(g.value(rs).vec() == g.value(m).vec());
    CHECK_THROWS_AS(g.reshape(m, {4, 2}), ShapeError);
}

TEST_CASE("forward is deterministic") {
    Rng rng(42);
    Tensor<double> x = Tensor<double>::randn({5, 5}, rng);
    Tensor<double> y = Tensor<double>::randn({5, 5}, rng);
    Graph<double> g1, g2;
    auto r1 = g1.softmax(g1.matmul(g1.input(x), g1.input(y)), 1);
    auto r2 = g2.softmax(g2.matmul(g2.input(x), g2.input(y)), 1);
    CHECK(g1.value(r1).vec() == g2.value(r2).vec());
}

TEST_CASE("broadcasting rules") {
    Graph<float> g;
    auto m = g.input(Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto row = g.input(Tensor<float>({3}, {10, 20, 30}));
    auto sum = g.add(m, row);
    CHECK(g.value(sum).vec() == std::vector<float>{11, 22, 33, 14, 25, 36});

    auto col = g.input(Tensor<float>({2, 1}, {1, 2}));
    auto prod = g.mul(m, col);
    CHECK(g.value(prod).vec() == std::vector<float>{1, 2, 3, 8, 10, 12});

    auto bad = g.input(Tensor<float>({4}));
    CHECK_THROWS_AS(g.add(m, bad), ShapeError);
}
