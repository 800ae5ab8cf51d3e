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
#include "csiforge/quantizer/bitstream.hpp"
#include "csiforge/quantizer/quantizer.hpp"
#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace csiforge;
using namespace csiforge::quant;

namespace
{

// Boundaries -3..3 at b_max = 3.
const std::vector<double> kUnitRow{-3, -2, -1, 0, 1, 2, 3};

std::vector<double> random_row(std::mt19937_64 &rng, int b_max)
{
    std::normal_distribution<double> first(0.0, 1.0);
    std::uniform_real_distribution<double> step(-0.2, 1.0); // some steps collapse under relu
    std::vector<double> row(boundary_count(b_max));
    double acc = first(rng);
    for (auto &b : row)
    {
        b = acc;
        acc += std::max(0.0, step(rng));
    }
    return row;
}

} // namespace

TEST_CASE("materialize_boundaries - cumulative rectified sums")
{
    QuantizerParams p(1, 3);
    SECTION("all zero parameters give tied boundaries at zero")
    {
        auto b = materialize_boundaries(p);
        for (double v : b.data())
            CHECK(v == 0.0);
    }
    SECTION("unit intervals from -3")
    {
        p.raw.value = diff::Tensor({1, 7}, {-3, 1, 1, 1, 1, 1, 1});
        CHECK(materialize_boundaries(p) == diff::Tensor({1, 7}, {-3, -2, -1, 0, 1, 2, 3}));
    }
    SECTION("a negative pseudo-interval contributes nothing")
    {
        p.raw.value = diff::Tensor({1, 7}, {-3, 1, -5, 1, 1, 1, 1});
        auto b = materialize_boundaries(p);
        CHECK(b == diff::Tensor({1, 7}, {-3, -2, -2, -1, 0, 1, 2}));
        CHECK(std::is_sorted(b.data().begin(), b.data().end()));
    }
}

TEST_CASE("allocate_bits - index-order spreading")
{
    auto all3 = allocate_bits(144, 48, 3);
    CHECK(std::all_of(all3.bits.begin(), all3.bits.end(), [](int b) { return b == 3; }));
    auto all1 = allocate_bits(48, 48, 3);
    CHECK(std::all_of(all1.bits.begin(), all1.bits.end(), [](int b) { return b == 1; }));

    auto a76 = allocate_bits(76, 48, 3);
    CHECK(std::count(a76.bits.begin(), a76.bits.end(), 2) == 28);
    CHECK(std::count(a76.bits.begin(), a76.bits.end(), 1) == 20);
    CHECK(a76.total() == 76);
    CHECK(a76.bits.front() == 2);
    CHECK(a76.bits.back() == 1);
    CHECK(a76.alpha(0) == 2);
    CHECK(a76.alpha(47) == 4);

    CHECK_THROWS_AS(allocate_bits(47, 48, 3), QuantizerError);
    CHECK_THROWS_AS(allocate_bits(145, 48, 3), QuantizerError);
}

TEST_CASE("quantize_levels / pack_bits - worked example at b_max = 3")
{
    const double z = -1.5; // b2 < z < b3
    CHECK(quantize_levels(z, kUnitRow, 3, 3) == LevelVector{+1, +1, -1, -1, -1, -1, -1});
    CHECK(quantize_levels(z, kUnitRow, 2, 3) == LevelVector{+1, +1, 0, -1, -1, -1, -1});
    CHECK(quantize_levels(z, kUnitRow, 1, 3) == LevelVector{0, 0, 0, -1, -1, -1, -1});

    CHECK(pack_bits({+1, +1, -1, -1, -1, -1, -1}, 3, 3) == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(pack_bits({+1, +1, 0, -1, -1, -1, -1}, 2, 3) == std::vector<std::uint8_t>{0, 1});
    CHECK(pack_bits({0, 0, 0, -1, -1, -1, -1}, 1, 3) == std::vector<std::uint8_t>{0});
}

TEST_CASE("quantize_levels - a feature on a boundary counts as above it")
{
    CHECK(quantize_levels(-1.0, kUnitRow, 3, 3) == LevelVector{+1, +1, +1, -1, -1, -1, -1});
    CHECK(quantize_levels(3.0, kUnitRow, 3, 3) == LevelVector(7, +1));
    CHECK(quantize_levels(3.0, kUnitRow, 1, 3) == LevelVector{+1, +1, +1, +1, 0, 0, 0});
}

TEST_CASE("pack_bits - malformed level vectors are rejected")
{
    CHECK_THROWS_AS(pack_bits({+1, -1, +1, -1, -1, -1, -1}, 3, 3), QuantizerError);
    CHECK_THROWS_AS(pack_bits({+1, +1, 0, -1, -1, -1, -1}, 3, 3), QuantizerError); // zero at full rate
    CHECK_THROWS_AS(pack_bits({+1, 0, +1, -1, -1, -1, -1}, 2, 3), QuantizerError);
    CHECK_THROWS_AS(pack_bits({+1, +1, -1}, 2, 3), QuantizerError);
}

TEST_CASE("unpack_bits - inverse mapping")
{
    CHECK(unpack_bits(std::vector<std::uint8_t>{0, 1}, 3) == LevelVector{+1, +1, 0, -1, -1, -1, -1});
    CHECK(unpack_bits(std::vector<std::uint8_t>{1, 1, 1}, 3) == LevelVector(7, +1));

    // Brute force over every count at every rate.
    for (int bits = 1; bits <= 3; ++bits)
        for (int m = 0; m < (1 << bits); ++m)
        {
            std::vector<std::uint8_t> s(static_cast<std::size_t>(bits));
            for (int b = 0; b < bits; ++b)
                s[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>((m >> (bits - 1 - b)) & 1);
            CHECK(pack_bits(unpack_bits(s, 3), bits, 3) == s);
        }
}

TEST_CASE("level_sum - direct sums of the worked example")
{
    CHECK(level_sum({+1, +1, -1, -1, -1, -1, -1}) == -3);
    CHECK(level_sum({+1, +1, 0, -1, -1, -1, -1}) == -2);
    CHECK(level_sum({0, 0, 0, -1, -1, -1, -1}) == -4);
    CHECK(level_sum(LevelVector(7, 0)) == 0);
}

TEST_CASE("class_set - representable level sums per rate")
{
    CHECK(class_set(3, 3) == std::set<int>{-7, -5, -3, -1, 1, 3, 5, 7});
    CHECK(class_set(2, 3) == std::set<int>{-6, -2, 2, 6});
    CHECK(class_set(1, 3) == std::set<int>{-4, 4});

    // Enumerating every decodable count gives the same sets.
    for (int b_max = 1; b_max <= 5; ++b_max)
        for (int bits = 1; bits <= b_max; ++bits)
        {
            std::set<int> seen;
            for (int m = 0; m < (1 << bits); ++m)
            {
                std::vector<std::uint8_t> s(static_cast<std::size_t>(bits));
                for (int b = 0; b < bits; ++b)
                    s[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>((m >> (bits - 1 - b)) & 1);
                seen.insert(level_sum(unpack_bits(s, b_max)));
            }
            CHECK(seen == class_set(bits, b_max));
        }
}

TEST_CASE("class_set - sets are pairwise disjoint across rates")
{
    for (int b_max : {2, 3, 4})
        for (int r1 = 1; r1 <= b_max; ++r1)
            for (int r2 = r1 + 1; r2 <= b_max; ++r2)
            {
                auto a = class_set(r1, b_max);
                auto b = class_set(r2, b_max);
                std::vector<int> both;
                std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
                CHECK(both.empty());
            }
}

TEST_CASE("QuantizerParams - parameter count")
{
    CHECK(QuantizerParams(48, 3).parameter_count() == 336);
    CHECK(QuantizerParams(10, 4).parameter_count() == 150);
}

TEST_CASE("QuantizerParams - initialization spans +-2 std around the mean")
{
    QuantizerParams p(2, 3);
    std::vector<double> mu{0.5, -1.0}, sd{1.5, 0.3};
    p.initialize(mu, sd);
    auto b = materialize_boundaries(p);
    CHECK(b[0] == Catch::Approx(0.5 - 3.0));
    CHECK(b[6] == Catch::Approx(0.5 + 3.0));
    CHECK(b[7] == Catch::Approx(-1.0 - 0.6));
    CHECK(b[13] == Catch::Approx(-1.0 + 0.6));
    CHECK(b[10] == Catch::Approx(-1.0));
}

TEST_CASE("surrogate_backward - critical boundaries only")
{
    const std::vector<double> up(7, 1.0);
    SECTION("boundary gradient at a critical entry")
    {
        const double z = -1.5;
        const double a = 0.7;
        std::vector<double> upa(7, a);
        auto g = surrogate_backward(z, kUnitRow, 3, 3, upa);
        // Critical entries are b2 (last +1) and b3 (first -1), indices 1 and 2.
        const double t3 = std::tanh(z - kUnitRow[2]);
        CHECK(g.db[2] == Catch::Approx(-a * (1 - t3 * t3)).epsilon(1e-14));
        const double t2 = std::tanh(z - kUnitRow[1]);
        CHECK(g.db[1] == Catch::Approx(-a * (1 - t2 * t2)).epsilon(1e-14));
        CHECK(g.dz == Catch::Approx(a * (1 - t2 * t2) + a * (1 - t3 * t3)).epsilon(1e-14));
        for (std::size_t k : {0u, 3u, 4u, 5u, 6u})
            CHECK(g.db[k] == 0.0);
    }
    SECTION("reduced rate masks the deactivated boundaries")
    {
        auto g = surrogate_backward(-1.5, kUnitRow, 2, 3, up);
        // Observed b2, b4, b6 -> signs +,-,-; critical are b2 and b4.
        CHECK(g.db[1] != 0.0);
        CHECK(g.db[3] != 0.0);
        for (std::size_t k : {0u, 2u, 4u, 5u, 6u})
            CHECK(g.db[k] == 0.0);
    }
    SECTION("sentinels keep out-of-range features trainable")
    {
        auto lo = surrogate_backward(-3.5, kUnitRow, 3, 3, up);
        CHECK(lo.db[0] != 0.0);
        CHECK(std::count(lo.db.begin(), lo.db.end(), 0.0) == 6);
        auto hi = surrogate_backward(3.5, kUnitRow, 3, 3, up);
        CHECK(hi.db[6] != 0.0);
        CHECK(std::count(hi.db.begin(), hi.db.end(), 0.0) == 6);
    }
    SECTION("saturation far from every boundary")
    {
        auto g = surrogate_backward(13.0, kUnitRow, 3, 3, up);
        CHECK(std::abs(g.dz) <= 1e-8);
        for (double v : g.db)
            CHECK(std::abs(v) <= 1e-8);
    }
    SECTION("tanh branch matches finite differences at z - b = 0.2")
    {
        // Only b4 observed at one bit; z - b4 = 0.2 makes it the critical entry.
        const double z = 0.2;
        std::vector<double> only(7, 0.0);
        only[3] = 1.0;
        auto g = surrogate_backward(z, kUnitRow, 1, 3, only);
        const double h = 1e-5;
        const double fd_z = (std::tanh(z + h - 0.0) - std::tanh(z - h - 0.0)) / (2 * h);
        const double fd_b = (std::tanh(z - h) - std::tanh(z + h)) / (2 * h);
        CHECK(testing::rel_error(g.dz, fd_z) <= 1e-4);
        CHECK(testing::rel_error(g.db[3], fd_b) <= 1e-4);
    }
}

TEST_CASE("properties - monotonicity, round trip and class membership")
{
    std::mt19937_64 rng(99);
    for (int b_max : {2, 3, 4})
        for (int trial = 0; trial < 20; ++trial)
        {
            const auto row = random_row(rng, b_max);
            for (int bits = 1; bits <= b_max; ++bits)
            {
                const auto classes = class_set(bits, b_max);
                int prev = std::numeric_limits<int>::min();
                for (int i = 0; i < 1000; ++i)
                {
                    const double z = row.front() - 1.0 + (row.back() - row.front() + 2.0) * i / 999.0;
                    const auto lv = quantize_levels(z, row, bits, b_max);
                    const int s = level_sum(lv);
                    CHECK(s >= prev);
                    prev = s;
                    CHECK(classes.count(s) == 1);
                    CHECK(unpack_bits(pack_bits(lv, bits, b_max), b_max) == lv);
                }
            }
        }
}

TEST_CASE("quantize_level_sums - graph op agrees with the scalar codec")
{
    std::mt19937_64 rng(3);
    const std::size_t n = 6;
    QuantizerParams q(n, 3);
    std::vector<double> mu(n, 0.0), sd(n, 1.0);
    q.initialize(mu, sd);
    std::normal_distribution<double> nd(0.0, 1.5);
    diff::Parameter z("z", diff::Tensor({4, n}));
    for (auto &v : z.value.storage())
        v = nd(rng);
    const auto alloc = allocate_bits(11, n, 3);
    diff::Tensor weights({4, n});
    for (auto &v : weights.storage())
        v = nd(rng);

    z.zero_grad();
    q.raw.zero_grad();
    diff::Graph g;
    auto bounds = boundaries(g, q);
    auto sums = quantize_level_sums(g.param(z), bounds, alloc);
    g.backward(diff::sum(diff::mul(sums, g.constant(weights))));

    const auto b = materialize_boundaries(q);
    diff::Tensor dz_expected({4, n});
    diff::Tensor db_expected({n, 7});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t i = 0; i < n; ++i)
        {
            std::span row(b.ptr() + i * 7, 7);
            CHECK(sums.value()[r * n + i] == level_sum(quantize_levels(z.value[r * n + i], row, alloc.bits[i], 3)));
            std::vector<double> up(7, weights[r * n + i]);
            auto sg = surrogate_backward(z.value[r * n + i], row, alloc.bits[i], 3, up);
            dz_expected[r * n + i] += sg.dz;
            for (std::size_t k = 0; k < 7; ++k)
                db_expected[i * 7 + k] += sg.db[k];
        }
    for (std::size_t i = 0; i < dz_expected.size(); ++i)
        CHECK(z.grad[i] == Catch::Approx(dz_expected[i]).margin(1e-14));

    // Chain through the cumulative relu: d raw_j = sum_{k >= j} d b_k (j = 0 or raw_j > 0).
    for (std::size_t i = 0; i < n; ++i)
    {
        double tail = 0.0;
        for (std::size_t k = 7; k-- > 0;)
        {
            tail += db_expected[i * 7 + k];
            CHECK(q.raw.grad[i * 7 + k] == Catch::Approx(tail).margin(1e-14));
        }
    }
}

TEST_CASE("boundaries - finite differences through the cumulative relu")
{
    std::mt19937_64 rng(8);
    QuantizerParams q(3, 3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (auto &v : q.raw.value.storage())
        v = u(rng);
    q.raw.value[4] = -0.5; // inactive interval
    diff::Tensor w({3, 7});
    for (auto &v : w.storage())
        v = u(rng) - 0.5;
    auto res = testing::gradcheck(
        [&](diff::Graph &g) { return diff::sum(diff::mul(boundaries(g, q), g.constant(w))); }, {&q.raw}, 21, 1);
    CHECK(res.max_rel_error <= 1e-6);
}

TEST_CASE("bitstream - feature order, wire packing and round trip")
{
    diff::Tensor b({2, 7}, {-3, -2, -1, 0, 1, 2, 3, -3, -2, -1, 0, 1, 2, 3});
    std::vector<double> z{-1.5, 2.5};
    SECTION("3 + 2 bits")
    {
        auto alloc = allocate_bits(5, 2, 3);
        auto s = encode_bitstream(z, b, alloc);
        CHECK(s.bits == std::vector<std::uint8_t>{0, 1, 0, 1, 1});
        auto wire = to_wire(s);
        REQUIRE(wire.size() == 1);
        CHECK(wire[0] == 0b01011000);
        CHECK(from_wire(wire, 5, 2, 3) == s);
        CHECK(decode_level_sums(s) == std::vector<double>{-3.0, 6.0});
        CHECK_THROWS_AS(from_wire(std::vector<std::uint8_t>{0, 0}, 5, 2, 3), QuantizerError);
    }
    SECTION("random streams survive the wire")
    {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> nd(0.0, 2.0);
        for (int total = 2; total <= 6; ++total)
            for (int t = 0; t < 50; ++t)
            {
                std::vector<double> zz{nd(rng), nd(rng)};
                auto s = encode_bitstream(zz, b, allocate_bits(total, 2, 3));
                CHECK(from_wire(to_wire(s), total, 2, 3) == s);
            }
    }
}
