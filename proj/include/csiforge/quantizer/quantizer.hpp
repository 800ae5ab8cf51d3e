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

#pragma once

#include "csiforge/diffcore/graph.hpp"

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace csiforge::quant
{

/// Comparator outputs of one feature, entries in {-1, 0, +1}.
using LevelVector = std::vector<std::int8_t>;

/// Number of boundaries (and level-vector entries) of a b_max-bit quantizer.
constexpr std::size_t boundary_count(int b_max) { return (std::size_t{1} << b_max) - 1; }

class QuantizerError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-feature bit depths for a total feedback length.
struct BitAllocation
{
    int b_max = 0;
    std::vector<int> bits;

    std::size_t features() const { return bits.size(); }
    int total() const;
    /// Downsampling factor 2^(b_max - bits[i]).
    int alpha(std::size_t i) const { return 1 << (b_max - bits[i]); }

    bool operator==(const BitAllocation &) const = default;
};

/// Spreads `total_bits` over `features` in index order: the first
/// total_bits mod features features receive one extra bit.
BitAllocation allocate_bits(int total_bits, std::size_t features, int b_max);

/// Trainable boundary parameters for N features.
///
/// Stored as an [N, 2^b_max - 1] parameter whose column 0 holds the first
/// boundary and column k >= 1 the pseudo-interval preceding boundary k+1.
/// Boundaries are the running sum of the first boundary and the rectified
/// pseudo-intervals, so they never decrease.
class QuantizerParams
{
public:
    QuantizerParams() = default;
    QuantizerParams(std::size_t features, int b_max);

    std::size_t features() const { return features_; }
    int b_max() const { return b_max_; }
    std::size_t parameter_count() const { return raw.value.size(); }

    /// Evenly spaced boundaries spanning mean +- 2 std of each feature.
    void initialize(std::span<const double> feature_mean, std::span<const double> feature_std);

    diff::Parameter raw;

private:
    std::size_t features_ = 0;
    int b_max_ = 0;
};

/// [N, 2^b_max - 1] boundary grid, rows non-decreasing.
diff::Tensor materialize_boundaries(const QuantizerParams &params);

/// Comparator outputs at rate `bits`: only boundaries alpha*j are observed,
/// entries implied by ordering are restored, the alpha-1 undetermined ones are 0.
/// sign(0) counts as +1.
LevelVector quantize_levels(double z, std::span<const double> boundaries, int bits, int b_max);

/// MSB-first binary count of +1 entries at the observed indices.
std::vector<std::uint8_t> pack_bits(const LevelVector &levels, int bits, int b_max);

/// Inverse of pack_bits; the rate is the number of bits given.
LevelVector unpack_bits(std::span<const std::uint8_t> bits, int b_max);

int level_sum(const LevelVector &levels);

/// Level sums representable with `bits` bits.
std::set<int> class_set(int bits, int b_max);

/// Indices (0-based) of the boundaries observed at rate `bits`.
std::vector<std::size_t> active_indices(int bits, int b_max);

struct SurrogateGrad
{
    double dz = 0.0;
    std::vector<double> db;
};

/// Gradients of the tanh surrogate, restricted to the critical observed
/// boundaries (those where the sign flips against an observed neighbour,
/// with +1 assumed below the first and -1 above the last).
/// `upstream` holds dL/dl for every level entry.
SurrogateGrad surrogate_backward(double z, std::span<const double> boundaries, int bits, int b_max,
                                 std::span<const double> upstream);

// Graph primitives.

/// Materialized boundaries as a differentiable function of params.raw.
diff::Var boundaries(diff::Graph &g, QuantizerParams &params);

/// Level sums z(s) for features z [B, N] under `alloc`; forward is exact,
/// backward applies the surrogate rule.
diff::Var quantize_level_sums(const diff::Var &z, const diff::Var &bounds, const BitAllocation &alloc);

} // namespace csiforge::quant
