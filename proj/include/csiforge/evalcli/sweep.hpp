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

#include "csiforge/chansim/dataset.hpp"
#include "csiforge/evalcli/metrics.hpp"
#include "csiforge/trainer/checkpoint.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace csiforge::eval
{

enum class Mode
{
    csi_only,
    fused
};

std::string to_string(Mode m);
Mode parse_mode(const std::string &s);

struct ReportRow
{
    int rate = 0;
    double snr_db = 0.0; // +inf = perfect CSI at the encoder
    Mode mode = Mode::csi_only;
    bool trained = false;
    double mean_loss = 0.0;
    double loss_db = 0.0;
    double cosine_mean = 0.0;     // per-subcarrier |h^H h_hat| / (|h| |h_hat|)
    double normalized_gain = 0.0; // mean |h^H p|^2 / |h|^2
    double throughput = 0.0;      // mean per-sample sum over subcarriers, bits/s/Hz
    Cdf gains;                    // |h^H p|^2 samples
};

/// Ideal (true-channel) and random beams on the same channels.
struct BaselineRow
{
    double link_snr_db = 0.0;
    double ideal_gain = 0.0, ideal_throughput = 0.0;
    double random_gain = 0.0, random_throughput = 0.0;
    Cdf ideal, random;
};

struct EvalReport
{
    std::vector<ReportRow> rows;
    BaselineRow baseline;

    const ReportRow *find(int rate, double snr_db, Mode mode) const;
    /// Header plus one line per row.
    void write_csv(std::ostream &out) const;
    void write_baselines_csv(std::ostream &out) const;
};

struct SweepOptions
{
    std::vector<int> rates;
    std::vector<double> snrs{sim::kPerfectCsi};
    std::vector<Mode> modes{Mode::csi_only};
    /// Transmit SNR used for throughput.
    double link_snr_db = 10.0;
    std::uint64_t seed = 1;
    std::size_t batch = 32;
};

/// Encode -> pack -> unpack -> (refine) -> decode over every (rate, snr, mode).
EvalReport rate_sweep(const train::Checkpoint &ckpt, const sim::Dataset &data, const SweepOptions &opt);

/// "48:144:8" (inclusive range) or "48,72,96".
std::vector<int> parse_rates(const std::string &spec);
/// Comma list of dB values; "inf" or "perfect" for noiseless estimates.
std::vector<double> parse_snrs(const std::string &spec);

} // namespace csiforge::eval
