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

#include "csiforge/evalcli/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace csiforge::eval
{

BeamMatrix beamformer_from_channel(const sim::ChannelMatrix &h_hat)
{
    BeamMatrix p(h_hat.rows(), h_hat.cols());
    for (Eigen::Index n = 0; n < h_hat.cols(); ++n)
    {
        const double norm = h_hat.col(n).norm();
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw EvalError("beamformer_from_channel: subcarrier " + std::to_string(n) + " has a zero channel");
        p.col(n) = h_hat.col(n) / norm;
    }
    return p;
}

std::vector<double> precoded_gains(const sim::ChannelMatrix &h, const BeamMatrix &p)
{
    if (h.rows() != p.rows() || h.cols() != p.cols())
        throw EvalError("precoded_gains: channel and beam shapes differ");
    std::vector<double> g(static_cast<std::size_t>(h.cols()));
    for (Eigen::Index n = 0; n < h.cols(); ++n)
        g[static_cast<std::size_t>(n)] = std::norm(h.col(n).dot(p.col(n))); // dot conjugates h
    return g;
}

std::vector<double> normalized_gains(const sim::ChannelMatrix &h, const BeamMatrix &p)
{
    auto g = precoded_gains(h, p);
    for (Eigen::Index n = 0; n < h.cols(); ++n)
    {
        const double e = h.col(n).squaredNorm();
        g[static_cast<std::size_t>(n)] = e > 0.0 ? g[static_cast<std::size_t>(n)] / e : 0.0;
    }
    return g;
}

Cdf::Cdf(std::vector<double> samples) : samples_(std::move(samples))
{
    std::sort(samples_.begin(), samples_.end());
}

double Cdf::at(double x) const
{
    if (samples_.empty())
        return 0.0;
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double Cdf::quantile(double p) const
{
    if (samples_.empty())
        throw EvalError("quantile of an empty CDF");
    p = std::clamp(p, 0.0, 1.0);
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(samples_.size())));
    return samples_[k == 0 ? 0 : k - 1];
}

double Cdf::mean() const
{
    if (samples_.empty())
        return 0.0;
    return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

Cdf gain_cdf(const std::vector<sim::ChannelMatrix> &h, const std::vector<BeamMatrix> &p)
{
    if (h.size() != p.size())
        throw EvalError("gain_cdf: channel and beam counts differ");
    std::vector<double> all;
    for (std::size_t i = 0; i < h.size(); ++i)
    {
        const auto g = precoded_gains(h[i], p[i]);
        all.insert(all.end(), g.begin(), g.end());
    }
    return Cdf(std::move(all));
}

bool stochastically_dominates(const Cdf &a, const Cdf &b)
{
    for (const auto *c : {&a, &b})
        for (double x : c->samples())
            if (a.at(x) > b.at(x))
                return false;
    return true;
}

double throughput(const sim::ChannelMatrix &h, const BeamMatrix &p, double snr_db)
{
    const double snr = std::pow(10.0, snr_db / 10.0);
    double r = 0.0;
    for (double g : precoded_gains(h, p))
        r += std::log2(1.0 + g * snr);
    return r;
}

BeamMatrix random_beams(std::size_t n_tx, std::size_t n_sc, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    BeamMatrix p(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(n_sc));
    for (Eigen::Index n = 0; n < p.cols(); ++n)
    {
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            p(i, n) = {nd(rng), nd(rng)};
        p.col(n).normalize();
    }
    return p;
}

} // namespace csiforge::eval
