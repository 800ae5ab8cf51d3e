// SPDX-License-Identifier: Apache-2.0
//
// csiforge: variable-rate CSI feedback codec and MIMO-OFDM simulation harness
// Copyright (C) 2026 The csiforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <catch2/catch_amalgamated.hpp>

#include "csiforge/diffcore/ops.hpp"
#include "gradcheck.hpp"

#include <cmath>
#include <random>

using namespace csiforge::diff;
using csiforge::testing::gradcheck;

namespace
{

Tensor random_tensor(Shape s, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(s));
    for (auto &v : t.storage())
        v = u(rng);
    return t;
}

} // namespace

TEST_CASE("forward - identity matmul returns the operand")
{
    Graph g;
    auto a = g.constant(Tensor({2, 2}, {1.5, -2.0, 3.25, 4.0}));
    auto eye = g.constant(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    CHECK(matmul(a, eye).value() == a.value());
}

TEST_CASE("forward - softmax of zeros is uniform")
{
    Graph g;
    auto y = softmax(g.constant(Tensor({4}, 0.0)));
    for (double v : y.value().data())
        CHECK(v == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("forward - layer norm output is zero mean, unit variance")
{
    Graph g;
    auto y = layer_norm(g.constant(Tensor({4}, {1, 2, 3, 4})), g.constant(Tensor({4}, 1.0)),
                        g.constant(Tensor({4}, 0.0)));
    double mu = 0.0, var = 0.0;
    for (double v : y.value().data())
        mu += v / 4.0;
    for (double v : y.value().data())
        var += (v - mu) * (v - mu) / 4.0;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-6);
}

TEST_CASE("forward - shape mismatch names the primitive")
{
    Graph g;
    auto a = g.constant(Tensor({2, 3}));
    auto b = g.constant(Tensor({2, 3}));
    try
    {
        matmul(a, b);
        FAIL("expected ShapeError");
    }
    catch (const ShapeError &e)
    {
        CHECK(e.op() == "matmul");
    }
    CHECK_THROWS_AS(add(a, g.constant(Tensor({3, 2}))), ShapeError);
    CHECK_THROWS_AS(concat({a, g.constant(Tensor({3, 2}))}, 0), ShapeError);
}

TEST_CASE("backward - sum gives a gradient of ones")
{
    Parameter x("x", Tensor({5}, {0.1, -2, 3, 4, 5}));
    Graph g;
    g.backward(sum(g.param(x)));
    for (double v : x.grad.data())
        CHECK(v == 1.0);
}

TEST_CASE("backward - non-scalar loss is rejected")
{
    Parameter x("x", Tensor({3}, 1.0));
    Graph g;
    auto y = tanh(g.param(x));
    CHECK_THROWS_AS(g.backward(y), ShapeError);
}

TEST_CASE("backward - only parameters that require gradients are populated")
{
    Parameter a("a", Tensor({3}, {1, 2, 3}));
    Parameter b("b", Tensor({3}, {4, 5, 6}));
    b.requires_grad = false;
    Graph g;
    g.backward(sum(mul(g.param(a), g.param(b))));
    CHECK(a.grad == Tensor({3}, {4, 5, 6}));
    CHECK(b.grad == Tensor({3}));
}

TEST_CASE("stop_gradient - forward identity and dead backward branch")
{
    std::mt19937_64 rng(11);
    Parameter x("x", random_tensor({6}, rng));
    Parameter y("y", random_tensor({6}, rng));

    SECTION("forward is bit-identical")
    {
        Graph g;
        CHECK(stop_gradient(g.param(x)).value() == x.value);
    }
    SECTION("sum(sg(x) * y): zero gradient for x, x for y")
    {
        x.zero_grad();
        y.zero_grad();
        Graph g;
        g.backward(sum(mul(stop_gradient(g.param(x)), g.param(y))));
        CHECK(x.grad == Tensor({6}));
        CHECK(y.grad == x.value);
    }
    SECTION("x + sg(y - x) forwards y and has unit gradient in x")
    {
        x.zero_grad();
        y.zero_grad();
        Graph g;
        auto xv = g.param(x);
        auto out = add(xv, stop_gradient(sub(g.param(y), xv)));
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(out.value()[i] == Catch::Approx(y.value[i]).epsilon(1e-15));
        g.backward(sum(out));
        for (double v : x.grad.data())
            CHECK(v == 1.0);
        CHECK(y.grad == Tensor({6}));
    }
}

TEST_CASE("backward - tanh derivative at 0.3 matches finite differences")
{
    Parameter x("x", Tensor({1}, {0.3}));
    const double expected = 1.0 - std::tanh(0.3) * std::tanh(0.3);
    CHECK(expected == Catch::Approx(0.91513).margin(1e-5));
    Graph g;
    g.backward(sum(tanh(g.param(x))));
    const double h = 1e-5;
    const double fd = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h);
    CHECK(std::abs(x.grad[0] - fd) / fd <= 1e-4);
    CHECK(x.grad[0] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward - every differentiable primitive passes a finite-difference check")
{
    std::mt19937_64 rng(2024);
    Parameter a("a", random_tensor({2, 3, 4}, rng));
    Parameter b("b", random_tensor({2, 3, 4}, rng));
    Parameter w("w", random_tensor({4, 5}, rng));
    Parameter bias("bias", random_tensor({4}, rng));
    Parameter gamma("gamma", random_tensor({4}, rng, 0.5, 1.5));
    Parameter beta("beta", random_tensor({4}, rng));
    Parameter pos("pos", random_tensor({6}, rng, 0.5, 2.0));
    // Scrambles the result before reducing so every output element has a distinct weight.
    Tensor weights = random_tensor({64}, rng);
    auto weighted = [&](Graph &g, const Var &v) {
        Tensor wt(v.shape());
        for (std::size_t i = 0; i < wt.size(); ++i)
            wt[i] = weights[i % weights.size()];
        return sum(mul(v, g.constant(std::move(wt))));
    };

    auto check = [&](const char *name, auto build, std::vector<Parameter *> ps) {
        INFO(name);
        auto res = gradcheck([&](Graph &g) { return weighted(g, build(g)); }, ps, 40, 7);
        CHECK(res.max_rel_error <= 1e-4);
    };

    check("add", [&](Graph &g) { return add(g.param(a), g.param(b)); }, {&a, &b});
    check("sub", [&](Graph &g) { return sub(g.param(a), g.param(b)); }, {&a, &b});
    check("mul", [&](Graph &g) { return mul(g.param(a), g.param(b)); }, {&a, &b});
    check("scale", [&](Graph &g) { return scale(g.param(a), -1.7); }, {&a});
    check("add_bias", [&](Graph &g) { return add_bias(g.param(a), g.param(bias)); }, {&a, &bias});
    check("mul_rows", [&](Graph &g) { return mul_rows(g.param(a), g.param(pos)); }, {&a, &pos});
    check("tanh", [&](Graph &g) { return tanh(g.param(a)); }, {&a});
    check("gelu", [&](Graph &g) { return gelu(g.param(a)); }, {&a});
    check("rsqrt", [&](Graph &g) { return rsqrt(g.param(pos)); }, {&pos});
    check("matmul", [&](Graph &g) { return matmul(g.param(a), g.param(w)); }, {&a, &w});
    check("bmm", [&](Graph &g) { return bmm(reshape(g.param(a), {2, 3, 4}), reshape(g.param(b), {2, 4, 3})); },
          {&a, &b});
    check("bmm^T", [&](Graph &g) { return bmm(g.param(a), g.param(b), true); }, {&a, &b});
    check("softmax", [&](Graph &g) { return softmax(g.param(a)); }, {&a});
    check("layer_norm", [&](Graph &g) { return layer_norm(g.param(a), g.param(gamma), g.param(beta)); },
          {&a, &gamma, &beta});
    check("permute", [&](Graph &g) { return permute(g.param(a), {2, 0, 1}); }, {&a});
    check("concat", [&](Graph &g) { return concat({g.param(a), g.param(b)}, 1); }, {&a, &b});
    check("slice_rows", [&](Graph &g) { return slice_rows(g.param(a), 1, 2); }, {&a});
    auto idx = std::make_shared<const std::vector<std::int64_t>>(std::vector<std::int64_t>{2, -1, 0, 0, 1});
    check("gather_rows", [&](Graph &g) { return gather_rows(g.param(a), 2, 4, idx, {2, 5, 4}); }, {&a});
    check("sum_last", [&](Graph &g) { return sum_last(g.param(a)); }, {&a});
    check("mean", [&](Graph &g) { return reshape(mean(mul(g.param(a), g.param(b))), {1}); }, {&a, &b});
}

TEST_CASE("relu - finite differences away from the kink")
{
    Parameter x("x", Tensor({6}, {-2.0, -0.5, -0.1, 0.2, 0.9, 3.0}));
    auto res = gradcheck([&](Graph &g) { return sum(mul(relu(g.param(x)), g.constant(Tensor({6}, 1.3)))); }, {&x},
                         6, 1);
    CHECK(res.max_rel_error <= 1e-4);
}

TEST_CASE("permute and gather_rows move data to the expected places")
{
    Graph g;
    auto x = g.constant(Tensor({2, 3}, {0, 1, 2, 3, 4, 5}));
    CHECK(permute(x, {1, 0}).value() == Tensor({3, 2}, {0, 3, 1, 4, 2, 5}));
    auto idx = std::make_shared<const std::vector<std::int64_t>>(std::vector<std::int64_t>{2, -1, 0});
    CHECK(gather_rows(x, 2, 1, idx, {2, 3}).value() == Tensor({2, 3}, {2, 0, 0, 5, 0, 3}));
    CHECK(concat({x, x}, 1).value() == Tensor({2, 6}, {0, 1, 2, 0, 1, 2, 3, 4, 5, 3, 4, 5}));
}

TEST_CASE("determinism - the same graph evaluated twice is bit-identical")
{
    std::mt19937_64 rng(5);
    Parameter a("a", random_tensor({8, 16}, rng));
    Parameter w("w", random_tensor({16, 16}, rng));
    auto run = [&] {
        Graph g;
        auto h = softmax(matmul(tanh(g.param(a)), g.param(w)));
        auto loss = sum(mul(h, h));
        w.zero_grad();
        g.backward(loss);
        return std::make_pair(h.value(), w.grad);
    };
    auto r1 = run();
    auto r2 = run();
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
}
