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

#include "csiforge/autonet/net.hpp"
#include "csiforge/chansim/channel.hpp"
#include "csiforge/diffcore/ops.hpp"
#include "gradcheck.hpp"

#include <cmath>
#include <random>

using namespace csiforge;
using namespace csiforge::net;
using diff::Tensor;

namespace
{

Tensor random_tensor(diff::Shape shape, std::uint64_t seed, double std = 1.0)
{
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, std);
    for (auto &v : t.storage())
        v = nd(rng);
    return t;
}

std::vector<double> row_times(const double *x, const diff::Parameter &w, const diff::Parameter &b, std::size_t col0,
                              std::size_t cols)
{
    const std::size_t in = w.value.dim(0), out = w.value.dim(1);
    std::vector<double> y(cols);
    for (std::size_t c = 0; c < cols; ++c)
    {
        double acc = b.value[col0 + c];
        for (std::size_t k = 0; k < in; ++k)
            acc += x[k] * w.value[k * out + col0 + c];
        y[c] = acc;
    }
    return y;
}

// Per-token evaluation of windowed attention written from the definition:
// token i attends to every real token sharing its window in the rolled grid.
Tensor naive_window_attention(const Tensor &x, const ParameterSet &ps, const std::string &name, Grid grid,
                              std::size_t dim, std::size_t heads, Grid win, Grid shift)
{
    const auto &wqkv = ps.get(name + ".qkv.w");
    const auto &bqkv = ps.get(name + ".qkv.b");
    const auto &wp = ps.get(name + ".proj.w");
    const auto &bp = ps.get(name + ".proj.b");
    const auto &table = ps.get(name + ".rel_bias");
    const std::size_t T = grid.tokens(), d = dim / heads;
    const std::size_t B = x.size() / (T * dim);
    Tensor out(x.shape());
    for (std::size_t b = 0; b < B; ++b)
    {
        std::vector<std::vector<double>> q(T), k(T), v(T);
        for (std::size_t t = 0; t < T; ++t)
        {
            const double *row = x.ptr() + (b * T + t) * dim;
            q[t] = row_times(row, wqkv, bqkv, 0, dim);
            k[t] = row_times(row, wqkv, bqkv, dim, dim);
            v[t] = row_times(row, wqkv, bqkv, 2 * dim, dim);
        }
        auto rolled = [&](std::size_t t) {
            const std::size_t i = t / grid.w, j = t % grid.w;
            return std::pair{(i + grid.h - shift.h) % grid.h, (j + grid.w - shift.w) % grid.w};
        };
        for (std::size_t t = 0; t < T; ++t)
        {
            const auto [yi, xi] = rolled(t);
            std::vector<std::size_t> members;
            for (std::size_t s = 0; s < T; ++s)
            {
                const auto [ys, xs] = rolled(s);
                if (ys / win.h == yi / win.h && xs / win.w == xi / win.w)
                    members.push_back(s);
            }
            std::vector<double> concat(dim);
            for (std::size_t h = 0; h < heads; ++h)
            {
                std::vector<double> sc;
                for (auto s : members)
                {
                    const auto [ys, xs] = rolled(s);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < d; ++c)
                        dot += q[t][h * d + c] * k[s][h * d + c];
                    const long dy = long(yi % win.h) - long(ys % win.h) + long(win.h) - 1;
                    const long dx = long(xi % win.w) - long(xs % win.w) + long(win.w) - 1;
                    sc.push_back(dot / std::sqrt(double(d)) +
                                 table.value[std::size_t(dy * long(2 * win.w - 1) + dx) * heads + h]);
                }
                const double mx = *std::max_element(sc.begin(), sc.end());
                double z = 0.0;
                for (auto &e : sc)
                    z += (e = std::exp(e - mx));
                for (std::size_t m = 0; m < members.size(); ++m)
                    for (std::size_t c = 0; c < d; ++c)
                        concat[h * d + c] += sc[m] / z * v[members[m]][h * d + c];
            }
            auto y = row_times(concat.data(), wp, bp, 0, dim);
            std::copy(y.begin(), y.end(), out.ptr() + (b * T + t) * dim);
        }
    }
    return out;
}

double max_abs_diff(const Tensor &a, const Tensor &b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("NetConfig - feature count and grid constraints")
{
    CHECK(NetConfig::full().features(sim::SimConfig::full()) == 48);
    CHECK(NetConfig::desk().features(sim::SimConfig::desk()) == 48);
    CHECK(NetConfig::full().patch_grid(sim::SimConfig::full()) == Grid{16, 48});

    auto sim12 = sim::SimConfig::desk();
    sim12.n_rb = 12;
    sim12.n_sc = 144;
    // 4x12 patch grid cannot take three 2x2 merges.
    CHECK_THROWS_AS(NetConfig::full().features(sim12), NetError);
    CHECK_THROWS_AS(NetConfig::full().features(sim::SimConfig::desk()), NetError);

    auto bad_heads = NetConfig::desk();
    bad_heads.heads[0] = 3;
    CHECK_THROWS_AS(bad_heads.features(sim::SimConfig::desk()), NetError);

    // Exact closed form when three merges apply.
    for (std::size_t nt : {16u, 32u, 64u})
        for (std::size_t rb : {8u, 16u, 48u})
        {
            auto s = sim::SimConfig::full();
            s.n_tx = nt;
            s.array_rows = nt / 8;
            s.array_cols = 4;
            s.n_rb = rb;
            s.n_sc = 12 * rb;
            CHECK(NetConfig::full().features(s) == nt * rb / 128 * 4);
        }
}

TEST_CASE("WindowAttention - uniform attention over identical tokens")
{
    ParameterSet ps;
    Initializer init(1);
    const std::size_t C = 8;
    WindowAttention attn(ps, init, "a", {2, 2}, C, 2, 4, false);
    REQUIRE(attn.window_count() == 1);
    auto token = random_tensor({C}, 3);
    Tensor x({1, 4, C});
    for (std::size_t t = 0; t < 4; ++t)
        std::copy_n(token.ptr(), C, x.ptr() + t * C);

    diff::Graph g(false);
    diff::Var w;
    auto y = attn(g, g.constant(x), &w);
    for (double a : w.value().data())
        CHECK(a == Catch::Approx(0.25).epsilon(1e-12));
    auto v = row_times(token.ptr(), ps.get("a.qkv.w"), ps.get("a.qkv.b"), 2 * C, C);
    auto expect = row_times(v.data(), ps.get("a.proj.w"), ps.get("a.proj.b"), 0, C);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < C; ++c)
            CHECK(y.value()[t * C + c] == Catch::Approx(expect[c]).margin(1e-12));
}

TEST_CASE("WindowAttention - matches a per-token oracle")
{
    struct Case
    {
        Grid grid;
        std::size_t window;
        bool shifted;
    };
    for (auto cs : {Case{{8, 8}, 4, false}, Case{{8, 8}, 4, true}, Case{{2, 6}, 4, false}, Case{{2, 6}, 4, true},
                    Case{{1, 4}, 4, true}, Case{{4, 16}, 4, true}})
    {
        ParameterSet ps;
        Initializer init(7);
        const std::size_t C = 8, H = 2;
        WindowAttention attn(ps, init, "a", cs.grid, C, H, cs.window, cs.shifted);
        ps.get("a.rel_bias").value = random_tensor(ps.get("a.rel_bias").value.shape(), 11, 0.5);
        auto x = random_tensor({2, cs.grid.tokens(), C}, 5);
        diff::Graph g(false);
        diff::Var w;
        auto y = attn(g, g.constant(x), &w);
        auto ref = naive_window_attention(x, ps, "a", cs.grid, C, H, attn.window(), attn.shift());
        CHECK(max_abs_diff(y.value(), ref) <= 1e-10);

        const std::size_t L = attn.window().tokens();
        for (std::size_t r = 0; r < w.value().size() / L; ++r)
        {
            double s = 0.0;
            for (std::size_t c = 0; c < L; ++c)
                s += w.value()[r * L + c];
            CHECK(std::abs(s - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("WindowAttention - shifted and plain windows")
{
    auto build = [](ParameterSet &ps, bool shifted) {
        Initializer init(9); // identical weights for both variants
        return WindowAttention(ps, init, "a", {8, 8}, 8, 2, 4, shifted);
    };
    ParameterSet p0, p1;
    auto plain = build(p0, false);
    auto shifted = build(p1, true);
    CHECK(shifted.shift() == Grid{2, 2});
    CHECK(plain.shift() == Grid{0, 0});

    diff::Graph g(false);
    auto x = random_tensor({1, 64, 8}, 2);
    CHECK(max_abs_diff(plain(g, g.constant(x)).value(), shifted(g, g.constant(x)).value()) > 1e-3);

    Tensor same({1, 64, 8});
    for (std::size_t t = 0; t < 64; ++t)
        for (std::size_t c = 0; c < 8; ++c)
            same[t * 8 + c] = 0.1 * double(c);
    CHECK(max_abs_diff(plain(g, g.constant(same)).value(), shifted(g, g.constant(same)).value()) <= 1e-12);
}

TEST_CASE("WindowAttention - cost grows linearly with the grid")
{
    ParameterSet ps;
    Initializer init(1);
    WindowAttention small(ps, init, "s", {8, 8}, 16, 2, 4, false);
    WindowAttention wide(ps, init, "w", {8, 16}, 16, 2, 4, false);
    WindowAttention tall(ps, init, "t", {16, 16}, 16, 2, 4, false);
    CHECK(wide.macs(1) == 2 * small.macs(1));
    CHECK(tall.macs(1) == 4 * small.macs(1));
    CHECK(small.macs(3) == 3 * small.macs(1));
}

TEST_CASE("PatchMerge - shapes and concatenation")
{
    ParameterSet ps;
    Initializer init(4);
    PatchMerge m1(ps, init, "m1", {2, 2}, 4, 6);
    CHECK(m1.output_grid() == Grid{1, 1});
    PatchMerge big(ps, init, "big", {16, 48}, 4, 8);
    CHECK(big.output_grid() == Grid{8, 24});
    CHECK_THROWS_AS(PatchMerge(ps, init, "odd", {3, 4}, 4, 4), NetError);

    diff::Graph g(false);
    auto y = big(g, g.constant(random_tensor({2, 16 * 48, 4}, 1)));
    CHECK(y.shape() == diff::Shape{2, 8 * 24, 8});

    // Four identical tokens: output is the projection of their concatenation.
    auto token = random_tensor({4}, 8);
    Tensor x({1, 4, 4});
    for (std::size_t t = 0; t < 4; ++t)
        std::copy_n(token.ptr(), 4, x.ptr() + t * 4);
    auto out = m1(g, g.constant(x));
    std::vector<double> cat;
    for (int r = 0; r < 4; ++r)
        cat.insert(cat.end(), token.data().begin(), token.data().end());
    double mu = 0.0, var = 0.0;
    for (double v : cat)
        mu += v / 16.0;
    for (double v : cat)
        var += (v - mu) * (v - mu) / 16.0;
    for (auto &v : cat)
        v = (v - mu) / std::sqrt(var + 1e-6);
    auto expect = row_times(cat.data(), ps.get("m1.proj.w"), ps.get("m1.proj.b"), 0, 6);
    for (std::size_t c = 0; c < 6; ++c)
        CHECK(out.value()[c] == Catch::Approx(expect[c]).margin(1e-12));
}

TEST_CASE("PatchSplit and patch embedding are inverse-shaped")
{
    ParameterSet ps;
    Initializer init(4);
    PatchSplit s(ps, init, "s", {8, 24}, 8, 4);
    CHECK(s.output_grid() == Grid{16, 48});
    diff::Graph g(false);
    CHECK(s(g, g.constant(random_tensor({2, 8 * 24, 8}, 3))).shape() == diff::Shape{2, 16 * 48, 4});

    // Identity-like check of the gathers: embed with an identity projection
    // and unembed with its transpose returns the input.
    PatchLayout layout{4, 24, 2, 2, 12};
    PatchEmbed embed(ps, init, "e", layout, layout.patch_len());
    PatchUnembed unembed(ps, init, "u", layout, layout.patch_len());
    const std::size_t n = layout.patch_len();
    for (auto name : {"e.proj.w", "u.proj.w"})
    {
        auto &w = ps.get(name).value;
        w.fill(0.0);
        for (std::size_t i = 0; i < n; ++i)
            w[i * n + i] = 1.0;
    }
    auto x = random_tensor({3, 4, 24, 2}, 12);
    auto back = unembed(g, embed(g, g.constant(x)));
    CHECK(back.shape() == x.shape());
    CHECK(back.value() == x);
}

TEST_CASE("Encoder / Decoder - shapes and degenerate inputs")
{
    SECTION("desk profile")
    {
        const auto sim = sim::SimConfig::desk();
        const auto cfg = NetConfig::desk();
        ParameterSet ps;
        Initializer init(3);
        Encoder enc(ps, init, cfg, sim);
        Decoder dec(ps, init, cfg, sim);
        diff::Graph g(false);
        auto zero = g.constant(Tensor({2, 8, 192, 2}));
        auto z = enc(g, zero);
        CHECK(z.shape() == diff::Shape{2, 48});
        for (double v : z.value().data())
            CHECK(std::isfinite(v));
        auto h = dec(g, g.constant(Tensor({2, 48})));
        CHECK(h.shape() == diff::Shape{2, 8, 192, 2});
        for (double v : h.value().data())
            CHECK(std::isfinite(v));
        CHECK_THROWS_AS(enc(g, g.constant(Tensor({1, 8, 144, 2}))), diff::ShapeError);
        CHECK_THROWS_AS(dec(g, g.constant(Tensor({1, 47}))), diff::ShapeError);
    }
    SECTION("full profile decoder output")
    {
        const auto sim = sim::SimConfig::full();
        ParameterSet ps;
        Initializer init(3);
        Decoder dec(ps, init, NetConfig::full(), sim);
        diff::Graph g(false);
        auto h = dec(g, g.constant(random_tensor({1, 48}, 1)));
        CHECK(h.shape() == diff::Shape{1, 32, 576, 2});
        auto m = tensor_to_channel(h.value(), 0);
        CHECK(m.rows() == 32);
        CHECK(m.cols() == 576);
    }
}

TEST_CASE("channels_to_tensor - layout and normalization")
{
    sim::ChannelMatrix a(2, 3);
    a << sim::cdouble(1, 2), sim::cdouble(3, 4), sim::cdouble(5, 6), sim::cdouble(7, 8), sim::cdouble(9, 10),
        sim::cdouble(11, 12);
    sim::ChannelMatrix zero = sim::ChannelMatrix::Zero(2, 3);
    auto t = channels_to_tensor({&a, &zero}, false);
    CHECK(t.shape() == diff::Shape{2, 2, 3, 2});
    CHECK(t[0] == 1);
    CHECK(t[1] == 2);
    CHECK(t[6] == 7);
    CHECK(tensor_to_channel(t, 0) == a);

    auto n = channels_to_tensor({&a, &zero}, true);
    double p = 0.0;
    for (std::size_t i = 0; i < 12; ++i)
        p += n[i] * n[i];
    CHECK(p / 6.0 == Catch::Approx(1.0));
    for (std::size_t i = 12; i < 24; ++i)
        CHECK(n[i] == 0.0);
}

TEST_CASE("Encoder + Decoder - end-to-end gradient against finite differences")
{
    const auto sim = sim::SimConfig::desk();
    auto cfg = NetConfig::desk();
    ParameterSet ps;
    Initializer init(21);
    Encoder enc(ps, init, cfg, sim);
    Decoder dec(ps, init, cfg, sim);
    // Nonzero relative-position biases so their gradient path is exercised too.
    for (auto *p : ps.list())
        if (p->name.find("rel_bias") != std::string::npos)
            p->value = random_tensor(p->value.shape(), p->value.size(), 0.3);

    const auto x = random_tensor({2, 8, 192, 2}, 4);
    const auto w = random_tensor({2, 8, 192, 2}, 5);
    auto loss = [&](diff::Graph &g) {
        auto h = dec(g, enc(g, g.constant(x)));
        return diff::sum(diff::mul(h, g.constant(w)));
    };
    auto res = testing::gradcheck(loss, ps.list(), 40, 17);
    CHECK(res.checked == 40);
    CHECK(res.max_rel_error <= 1e-3);
}

TEST_CASE("Initializer - fixed seed reproduces parameters")
{
    const auto sim = sim::SimConfig::desk();
    ParameterSet a, b;
    Initializer ia(5), ib(5);
    Encoder ea(a, ia, NetConfig::desk(), sim);
    Encoder eb(b, ib, NetConfig::desk(), sim);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.list()[i]->value == b.list()[i]->value);
    for (double v : a.list()[0]->value.data())
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
}
