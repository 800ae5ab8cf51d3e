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

#include <vector>

namespace csiforge::diff
{

// Elementwise, equal shapes.
Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var mul(const Var &a, const Var &b);
Var scale(const Var &x, double c);

/// x + b where b's shape is a trailing suffix of x's shape (b is tiled).
Var add_bias(const Var &x, const Var &b);

/// Scales each of the s.size() leading blocks of x by the matching entry of s.
Var mul_rows(const Var &x, const Var &s);

Var tanh(const Var &x);
Var relu(const Var &x);
/// Tanh-approximated GELU.
Var gelu(const Var &x);
Var rsqrt(const Var &x);
/// +1 for x >= 0, -1 otherwise. Has no backward rule of its own.
Var sign(const Var &x);

/// Forward identity, contributes no gradient to x.
Var stop_gradient(const Var &x);

/// [..., K] x [K, N] -> [..., N].
Var matmul(const Var &x, const Var &w);
/// Batched product of [G, m, k] and [G, k, n] (or [G, n, k] with transpose_b).
Var bmm(const Var &a, const Var &b, bool transpose_b = false);

/// Softmax over the last axis.
Var softmax(const Var &x);
/// Normalizes over the last axis, then applies gamma/beta of that length.
Var layer_norm(const Var &x, const Var &gamma, const Var &beta, double eps = 1e-6);

Var reshape(const Var &x, Shape shape);
/// Output axis i takes input axis perm[i].
Var permute(const Var &x, const std::vector<std::size_t> &perm);
Var concat(const std::vector<Var> &parts, std::size_t axis);
/// Rows [begin, end) along axis 0.
Var slice_rows(const Var &x, std::size_t begin, std::size_t end);

/// Per batch item, gathers rows of width `row_len` by index (-1 gives zeros).
/// x holds `batch` items of equal size; the result has shape out_shape
/// (batch * index.size() * row_len elements). Backward scatter-adds.
Var gather_rows(const Var &x, std::size_t batch, std::size_t row_len, const IndexMap &index, Shape out_shape);

Var sum(const Var &x);
Var mean(const Var &x);
/// Reduces the last axis.
Var sum_last(const Var &x);

} // namespace csiforge::diff
