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

#include <stdexcept>
#include <vector>

namespace csiforge::eval
{

class EvalError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-subcarrier beams, one unit-norm column per subcarrier.
using BeamMatrix = Eigen::MatrixXcd;

/// p_n = h_hat_n / ||h_hat_n||. Throws EvalError on a zero column.
BeamMatrix beamformer_from_channel(const sim::ChannelMatrix &h_hat);

/// |h_n^H p_n|^2 for every subcarrier.
std::vector<double> precoded_gains(const sim::ChannelMatrix &h, const BeamMatrix &p);

/// Gains divided by ||h_n||^2 (1 for ideal beams).
std::vector<double> normalized_gains(const sim::ChannelMatrix &h, const BeamMatrix &p);

/// Empirical CDF over a sorted sample set.
class Cdf
{
public:
    Cdf() = default;
    explicit Cdf(std::vector<double> samples);

    const std::vector<double> &samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    /// Fraction of samples <= x.
    double at(double x) const;
    double quantile(double p) const;
    double mean() const;

private:
    std::vector<double> samples_;
};

/// CDF of |h_n^H p_n|^2 over all (sample, subcarrier) pairs.
Cdf gain_cdf(const std::vector<sim::ChannelMatrix> &h, const std::vector<BeamMatrix> &p);

/// True when F_a(x) <= F_b(x) at every sample point of either CDF (a yields larger values).
bool stochastically_dominates(const Cdf &a, const Cdf &b);

/// sum_n log2(1 + |h_n^H p_n|^2 10^(snr_db / 10)).
double throughput(const sim::ChannelMatrix &h, const BeamMatrix &p, double snr_db);

/// Isotropic unit-norm beams (normalized complex Gaussian columns).
BeamMatrix random_beams(std::size_t n_tx, std::size_t n_sc, std::uint64_t seed);

} // namespace csiforge::eval
