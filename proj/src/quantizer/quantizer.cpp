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

#include "csiforge/quantizer/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace csiforge::quant
{

namespace
{

void check_rate(int bits, int b_max)
{
    if (b_max < 1 || b_max > 16)
        throw QuantizerError("b_max must lie in [1, 16], got " + std::to_string(b_max));
    if (bits < 1 || bits > b_max)
        throw QuantizerError("rate " + std::to_string(bits) + " outside [1, " + std::to_string(b_max) + "]");
}

// Level vector for m observed +1 entries at downsampling factor alpha.
LevelVector expand_count(int m, int alpha, int b_max)
{
    const auto k = boundary_count(b_max);
    LevelVector lv(k, -1);
    const auto pos = static_cast<std::size_t>(m) * alpha;
    for (std::size_t i = 0; i < pos; ++i)
        lv[i] = 1;
    for (std::size_t i = pos; i < std::min(k, pos + alpha - 1); ++i)
        lv[i] = 0;
    return lv;
}

int observed_count(double z, std::span<const double> row, int bits, int b_max)
{
    const int alpha = 1 << (b_max - bits);
    int m = 0;
    for (int j = 1; j < (1 << bits); ++j)
        m += z >= row[static_cast<std::size_t>(j * alpha - 1)] ? 1 : 0;
    return m;
}

} // namespace

int BitAllocation::total() const { return std::accumulate(bits.begin(), bits.end(), 0); }

BitAllocation allocate_bits(int total_bits, std::size_t features, int b_max)
{
    if (features == 0)
        throw QuantizerError("allocate_bits: no features");
    const auto n = static_cast<long>(features);
    if (total_bits < n || total_bits > n * b_max)
        throw QuantizerError("allocate_bits: " + std::to_string(total_bits) + " bits outside [" + std::to_string(n) +
                             ", " + std::to_string(n * b_max) + "]");
    BitAllocation a;
    a.b_max = b_max;
    a.bits.resize(features);
    const int base = static_cast<int>(total_bits / n);
    const auto extra = static_cast<std::size_t>(total_bits % n);
    for (std::size_t i = 0; i < features; ++i)
        a.bits[i] = base + (i < extra ? 1 : 0);
    return a;
}

QuantizerParams::QuantizerParams(std::size_t features, int b_max) : features_(features), b_max_(b_max)
{
    check_rate(b_max, b_max);
    raw = diff::Parameter("quantizer.boundaries", diff::Tensor({features, boundary_count(b_max)}));
}

void QuantizerParams::initialize(std::span<const double> feature_mean, std::span<const double> feature_std)
{
    if (feature_mean.size() != features_ || feature_std.size() != features_)
        throw QuantizerError("initialize: statistics length does not match feature count");
    const auto k = boundary_count(b_max_);
    const double half_steps = static_cast<double>(k - 1) / 2.0;
    for (std::size_t i = 0; i < features_; ++i)
    {
        const double sigma = std::max(feature_std[i], 1e-3);
        const double delta = k > 1 ? 2.0 * sigma / half_steps : 0.0;
        raw.value[i * k] = feature_mean[i] - half_steps * delta;
        for (std::size_t j = 1; j < k; ++j)
            raw.value[i * k + j] = delta;
    }
}

diff::Tensor materialize_boundaries(const QuantizerParams &params)
{
    const auto k = boundary_count(params.b_max());
    diff::Tensor out({params.features(), k});
    for (std::size_t i = 0; i < params.features(); ++i)
    {
        double acc = params.raw.value[i * k];
        out[i * k] = acc;
        for (std::size_t j = 1; j < k; ++j)
        {
            acc += std::max(0.0, params.raw.value[i * k + j]);
            out[i * k + j] = acc;
        }
    }
    return out;
}

std::vector<std::size_t> active_indices(int bits, int b_max)
{
    check_rate(bits, b_max);
    const int alpha = 1 << (b_max - bits);
    std::vector<std::size_t> idx;
    for (int j = 1; j < (1 << bits); ++j)
        idx.push_back(static_cast<std::size_t>(j * alpha - 1));
    return idx;
}

LevelVector quantize_levels(double z, std::span<const double> boundaries, int bits, int b_max)
{
    check_rate(bits, b_max);
    if (boundaries.size() != boundary_count(b_max))
        throw QuantizerError("quantize_levels: boundary row has wrong length");
    return expand_count(observed_count(z, boundaries, bits, b_max), 1 << (b_max - bits), b_max);
}

std::vector<std::uint8_t> pack_bits(const LevelVector &levels, int bits, int b_max)
{
    check_rate(bits, b_max);
    if (levels.size() != boundary_count(b_max))
        throw QuantizerError("pack_bits: level vector has wrong length");
    const int alpha = 1 << (b_max - bits);
    int m = 0;
    for (int j = 1; j < (1 << bits); ++j)
        m += levels[static_cast<std::size_t>(j * alpha - 1)] == 1 ? 1 : 0;
    if (expand_count(m, alpha, b_max) != levels)
        throw QuantizerError("pack_bits: level vector is not a valid " + std::to_string(bits) + "-bit pattern");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(bits));
    for (int b = 0; b < bits; ++b)
        out[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>((m >> (bits - 1 - b)) & 1);
    return out;
}

LevelVector unpack_bits(std::span<const std::uint8_t> bits, int b_max)
{
    const int rate = static_cast<int>(bits.size());
    check_rate(rate, b_max);
    int m = 0;
    for (auto b : bits)
        m = (m << 1) | (b & 1);
    return expand_count(m, 1 << (b_max - rate), b_max);
}

int level_sum(const LevelVector &levels) { return std::accumulate(levels.begin(), levels.end(), 0); }

std::set<int> class_set(int bits, int b_max)
{
    check_rate(bits, b_max);
    const int alpha = 1 << (b_max - bits);
    const double centre = ((1 << b_max) - 1) / 2.0;
    std::set<int> s;
    for (int n = 0; n < (1 << b_max); ++n)
        s.insert(2 * alpha * static_cast<int>(std::floor((n - centre) / alpha)) + alpha);
    return s;
}

SurrogateGrad surrogate_backward(double z, std::span<const double> boundaries, int bits, int b_max,
                                 std::span<const double> upstream)
{
    const auto k = boundary_count(b_max);
    if (boundaries.size() != k || upstream.size() != k)
        throw QuantizerError("surrogate_backward: row length mismatch");
    const auto idx = active_indices(bits, b_max);
    SurrogateGrad out;
    out.db.assign(k, 0.0);
    const std::size_t n = idx.size();
    auto sign_at = [&](std::size_t j) { return z >= boundaries[idx[j]] ? 1 : -1; };
    for (std::size_t j = 0; j < n; ++j)
    {
        const int s = sign_at(j);
        const int below = j == 0 ? 1 : sign_at(j - 1);
        const int above = j + 1 == n ? -1 : sign_at(j + 1);
        if (below * s != -1 && s * above != -1)
            continue;
        const std::size_t b = idx[j];
        const double t = std::tanh(z - boundaries[b]);
        const double d = upstream[b] * (1.0 - t * t);
        out.dz += d;
        out.db[b] -= d;
    }
    return out;
}

diff::Var boundaries(diff::Graph &g, QuantizerParams &params)
{
    auto raw = g.param(params.raw);
    const std::size_t n = params.features();
    const auto k = boundary_count(params.b_max());
    auto *gp = &g;
    const auto iraw = raw.id();
    return g.record("quantizer.boundaries", materialize_boundaries(params), {raw},
                    [gp, iraw, n, k](const diff::Tensor &go, std::vector<diff::Tensor *> &gi) {
                        const diff::Tensor &rv = gp->value(iraw);
                        for (std::size_t i = 0; i < n; ++i)
                        {
                            double tail = 0.0;
                            for (std::size_t j = k; j-- > 0;)
                            {
                                tail += go[i * k + j];
                                if (j == 0 || rv[i * k + j] > 0.0)
                                    (*gi[0])[i * k + j] += tail;
                            }
                        }
                    });
}

diff::Var quantize_level_sums(const diff::Var &z, const diff::Var &bounds, const BitAllocation &alloc)
{
    const auto k = boundary_count(alloc.b_max);
    const std::size_t n = alloc.features();
    if (z.shape().size() != 2 || z.shape()[1] != n)
        throw diff::ShapeError("quantize_level_sums", "features " + diff::to_string(z.shape()) +
                                                          " do not match allocation of " + std::to_string(n));
    if (bounds.shape() != diff::Shape{n, k})
        throw diff::ShapeError("quantize_level_sums", "boundary grid " + diff::to_string(bounds.shape()) +
                                                          " does not match " + std::to_string(n) + "x" +
                                                          std::to_string(k));
    const std::size_t batch = z.shape()[0];
    const diff::Tensor &zv = z.value();
    const diff::Tensor &bv = bounds.value();
    diff::Tensor out({batch, n});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i)
        {
            const int bits = alloc.bits[i];
            const int m = observed_count(zv[b * n + i], std::span(bv.ptr() + i * k, k), bits, alloc.b_max);
            const int alpha = alloc.alpha(i);
            out[b * n + i] = 2.0 * m * alpha - (1 << alloc.b_max) + alpha;
        }
    auto *gp = &z.graph();
    const auto iz = z.id(), ib = bounds.id();
    return gp->record(
        "quantize_level_sums", std::move(out), {z, bounds},
        [gp, iz, ib, alloc, batch, n, k](const diff::Tensor &go, std::vector<diff::Tensor *> &gi) {
            const diff::Tensor &zv = gp->value(iz);
            const diff::Tensor &bv = gp->value(ib);
            std::vector<double> up(k);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i < n; ++i)
                {
                    // Every level entry feeds the sum with unit weight.
                    std::fill(up.begin(), up.end(), go[b * n + i]);
                    auto sg = surrogate_backward(zv[b * n + i], std::span(bv.ptr() + i * k, k), alloc.bits[i],
                                                 alloc.b_max, up);
                    if (gi[0])
                        (*gi[0])[b * n + i] += sg.dz;
                    if (gi[1])
                        for (std::size_t j = 0; j < k; ++j)
                            (*gi[1])[i * k + j] += sg.db[j];
                }
        });
}

} // namespace csiforge::quant
