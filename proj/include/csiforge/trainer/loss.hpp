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

#include "csiforge/chansim/channel.hpp"
#include "csiforge/diffcore/graph.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace csiforge::train
{

class TrainError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// ||H/||H|| - H_hat/||H_hat|| ||_F^2, in [0, 4]. Throws on a zero-norm argument.
double reconstruction_loss(const sim::ChannelMatrix &h, const sim::ChannelMatrix &h_hat);

/// Normalized weights gamma^B_i / sum_j gamma^B_j (evaluated relative to the
/// largest rate so that large exponents do not overflow).
std::vector<double> rate_weights(std::span<const int> rates, double gamma);

/// sum_i gamma^B_i L_i / sum_i gamma^B_i.
double weighted_rate_loss(std::span<const double> losses, std::span<const int> rates, double gamma);

/// Channel form: one reconstruction per rate of the same target.
double weighted_rate_loss(const sim::ChannelMatrix &h, const std::vector<sim::ChannelMatrix> &reconstructions,
                          std::span<const int> rates, double gamma);

/// Per-sample reconstruction loss of [B, ...] tensors, shape [B].
diff::Var reconstruction_loss(const diff::Var &h, const diff::Var &h_hat);

} // namespace csiforge::train
