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

#include "csiforge/trainer/loss.hpp"
#include "csiforge/diffcore/ops.hpp"

#include <algorithm>
#include <cmath>

namespace csiforge::train
{

double reconstruction_loss(const sim::ChannelMatrix &h, const sim::ChannelMatrix &h_hat)
{
    if (h.rows() != h_hat.rows() || h.cols() != h_hat.cols())
        throw TrainError("reconstruction_loss: shape mismatch");
    const double a = h.norm(), b = h_hat.norm();
    if (!(a > 0.0) || !(b > 0.0))
        throw TrainError("reconstruction_loss: zero-norm channel");
    return (h / a - h_hat / b).squaredNorm();
}

std::vector<double> rate_weights(std::span<const int> rates, double gamma)
{
    if (rates.empty())
        throw TrainError("weighted_rate_loss: no rates");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw TrainError("weighted_rate_loss: gamma must be positive");
    const int top = *std::max_element(rates.begin(), rates.end());
    const double lg = std::log(gamma);
    std::vector<double> w;
    double total = 0.0;
    for (int r : rates)
    {
        w.push_back(std::exp(lg * (r - top)));
        total += w.back();
    }
    for (auto &v : w)
        v /= total;
    return w;
}

double weighted_rate_loss(std::span<const double> losses, std::span<const int> rates, double gamma)
{
    if (losses.size() != rates.size())
        throw TrainError("weighted_rate_loss: " + std::to_string(losses.size()) + " losses for " +
                         std::to_string(rates.size()) + " rates");
    const auto w = rate_weights(rates, gamma);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        acc += w[i] * losses[i];
    return acc;
}

double weighted_rate_loss(const sim::ChannelMatrix &h, const std::vector<sim::ChannelMatrix> &reconstructions,
                          std::span<const int> rates, double gamma)
{
    std::vector<double> l;
    for (const auto &r : reconstructions)
        l.push_back(reconstruction_loss(h, r));
    return weighted_rate_loss(l, rates, gamma);
}

diff::Var reconstruction_loss(const diff::Var &h, const diff::Var &h_hat)
{
    if (h.shape() != h_hat.shape() || h.shape().empty())
        throw diff::ShapeError("reconstruction_loss",
                               diff::to_string(h.shape()) + " vs " + diff::to_string(h_hat.shape()));
    const std::size_t B = h.shape()[0];
    auto a = diff::reshape(h, {B, h.size() / B});
    auto b = diff::reshape(h_hat, {B, h.size() / B});
    // ||u - v||^2 = 2 - 2 <a, b> / (||a|| ||b||) per sample.
    auto cos = diff::mul(diff::sum_last(diff::mul(a, b)),
                         diff::mul(diff::rsqrt(diff::sum_last(diff::mul(a, a))),
                                   diff::rsqrt(diff::sum_last(diff::mul(b, b)))));
    return diff::add(diff::scale(cos, -2.0), h.graph().constant(diff::Tensor({B}, 2.0)));
}

} // namespace csiforge::train
