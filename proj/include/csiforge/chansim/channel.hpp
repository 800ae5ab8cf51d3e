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

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace csiforge::sim
{

using cdouble = std::complex<double>;

/// Complex N_t x N_s spatial-frequency grid; column n is subcarrier n.
using ChannelMatrix = Eigen::MatrixXcd;

class SimError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct SimConfig
{
    std::size_t n_tx = 0;
    std::size_t n_rb = 0;
    std::size_t n_sc = 0;
    double scs_hz = 0.0;
    double f_dl_hz = 0.0;
    double f_ul_hz = 0.0;
    std::size_t fft_size = 0;
    double sample_rate_hz = 0.0;
    std::size_t array_rows = 0;
    std::size_t array_cols = 0;
    bool dual_polarized = false;

    /// 28/27 GHz, 60 kHz, 48 RBs, 4x4 dual-polarized planar array.
    static SimConfig full();
    /// 2x2 dual-polarized array over 16 RBs.
    static SimConfig desk();
    /// "full" or "desk".
    static SimConfig profile(const std::string &name);

    double fft_duration() const { return static_cast<double>(fft_size) / sample_rate_hz; }
    /// Baseband offset of subcarrier n, centred on the carrier.
    double subcarrier_offset(std::size_t n) const;

    void validate() const;

    bool operator==(const SimConfig &) const = default;
};

/// Multipath parameters. One entry per path in every array.
struct RaySet
{
    std::vector<cdouble> gain;     // baseband complex gain
    std::vector<double> delay;     // seconds
    std::vector<double> aod_az;    // departure azimuth, radians
    std::vector<double> aod_el;    // departure elevation
    std::vector<double> aoa_az;    // arrival azimuth
    std::vector<double> aoa_el;    // arrival elevation
    std::vector<double> pol_phase; // phase of the second polarization port
    bool los = false;
    std::uint64_t seed = 0;        // drives the uplink phase redraw

    std::size_t size() const { return gain.size(); }
    void validate(const SimConfig &cfg) const;

    bool operator==(const RaySet &) const = default;
};

/// Sentinel SNR for an uncorrupted estimate.
inline constexpr double kPerfectCsi = std::numeric_limits<double>::infinity();

/// Cross-polar attenuation of the second port, dB.
inline constexpr double kCrossPolarDb = 8.0;

RaySet sample_rayset(const SimConfig &cfg, std::uint64_t seed, double los_probability);

/// Array response of one path at `carrier_hz`, polarization factor included.
Eigen::VectorXcd steering(const SimConfig &cfg, double az, double el, double pol_phase, double carrier_hz);

ChannelMatrix rays_to_channel(const RaySet &rays, const SimConfig &cfg, double carrier_hz);

struct UplinkOptions
{
    bool redraw_phases = true;
};

/// Same geometry with independently redrawn path phases (seeded by rays.seed).
RaySet uplink_rays(const RaySet &rays, const UplinkOptions &opt = {});

ChannelMatrix make_paired_uplink(const RaySet &rays, const SimConfig &cfg, const UplinkOptions &opt = {});

/// Adds circular Gaussian noise at the given per-channel SNR. kPerfectCsi returns h unchanged.
ChannelMatrix corrupt_estimate(const ChannelMatrix &h, double snr_db, std::uint64_t seed);

/// Rounds every entry to single precision (the on-disk resolution).
void round_to_f32(ChannelMatrix &h);

} // namespace csiforge::sim
