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

#include "csiforge/chansim/channel.hpp"
#include "csiforge/common/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace csiforge::sim
{

namespace
{

constexpr double kPi = std::numbers::pi;
constexpr double kMeanDelay = 100e-9;
constexpr double kDecayDbPer100ns = 3.0;
constexpr double kLosBoostDb = 3.0;
constexpr double kElevationSigma = 10.0 * kPi / 180.0;
constexpr double kSectorHalfWidth = 60.0 * kPi / 180.0;

bool finite_all(const std::vector<double> &v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

SimConfig SimConfig::full()
{
    SimConfig c;
    c.n_tx = 32;
    c.n_rb = 48;
    c.n_sc = 576;
    c.scs_hz = 60e3;
    c.f_dl_hz = 28e9;
    c.f_ul_hz = 27e9;
    c.fft_size = 1024;
    c.sample_rate_hz = 61'440'000.0;
    c.array_rows = 4;
    c.array_cols = 4;
    c.dual_polarized = true;
    return c;
}

SimConfig SimConfig::desk()
{
    SimConfig c = full();
    c.n_tx = 8;
    c.n_rb = 16;
    c.n_sc = 192;
    c.fft_size = 256;
    c.sample_rate_hz = 15'360'000.0;
    c.array_rows = 2;
    c.array_cols = 2;
    return c;
}

SimConfig SimConfig::profile(const std::string &name)
{
    if (name == "full")
        return full();
    if (name == "desk")
        return desk();
    throw SimError("unknown profile '" + name + "' (expected full or desk)");
}

double SimConfig::subcarrier_offset(std::size_t n) const
{
    return (static_cast<double>(n) - (static_cast<double>(n_sc) - 1.0) / 2.0) * scs_hz;
}

void SimConfig::validate() const
{
    if (n_rb == 0 || n_sc != 12 * n_rb)
        throw SimError("SimConfig: n_sc must equal 12 * n_rb (n_rb > 0)");
    if (array_rows == 0 || array_cols == 0)
        throw SimError("SimConfig: empty antenna array");
    if (n_tx != array_rows * array_cols * (dual_polarized ? 2 : 1))
        throw SimError("SimConfig: n_tx does not match array geometry");
    if (n_tx % 2 != 0)
        throw SimError("SimConfig: n_tx must be even");
    if (!(scs_hz > 0) || !(sample_rate_hz > 0) || !(f_dl_hz > 0) || !(f_ul_hz > 0))
        throw SimError("SimConfig: frequencies must be positive");
    if (f_dl_hz == f_ul_hz)
        throw SimError("SimConfig: downlink and uplink carriers must differ");
    if (fft_size < n_sc)
        throw SimError("SimConfig: fft_size smaller than subcarrier count");
}

void RaySet::validate(const SimConfig &cfg) const
{
    const auto n = gain.size();
    if (n == 0)
        throw SimError("RaySet: at least one path required");
    if (delay.size() != n || aod_az.size() != n || aod_el.size() != n || aoa_az.size() != n || aoa_el.size() != n ||
        pol_phase.size() != n)
        throw SimError("RaySet: per-path arrays differ in length");
    for (const auto &g : gain)
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
            throw SimError("RaySet: non-finite gain");
    if (!finite_all(aod_az) || !finite_all(aod_el) || !finite_all(pol_phase) || !finite_all(delay))
        throw SimError("RaySet: non-finite path parameter");
    const double tmax = cfg.fft_duration();
    for (double t : delay)
        if (t < 0.0 || t >= tmax)
            throw SimError("RaySet: delay " + std::to_string(t) + " s outside [0, " + std::to_string(tmax) + ")");
    if (los && *std::min_element(delay.begin(), delay.end()) != delay[0])
        throw SimError("RaySet: LOS path must have the minimum delay");
}

RaySet sample_rayset(const SimConfig &cfg, std::uint64_t seed, double los_probability)
{
    if (!(los_probability >= 0.0 && los_probability <= 1.0))
        throw SimError("sample_rayset: los_probability outside [0, 1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> clusters(1, 6);
    std::exponential_distribution<double> delay_dist(1.0 / kMeanDelay);
    std::exponential_distribution<double> fading(1.0);
    std::normal_distribution<double> elev(0.0, kElevationSigma);

    RaySet r;
    r.seed = seed;
    r.los = unit(rng) < los_probability;
    const int n = clusters(rng);
    const double tmax = cfg.fft_duration();
    std::vector<double> power;
    for (int l = 0; l < n; ++l)
    {
        double tau = 0.0;
        if (!(r.los && l == 0))
            do
                tau = delay_dist(rng);
            while (tau >= tmax);
        r.delay.push_back(tau);
        r.aod_az.push_back((2.0 * unit(rng) - 1.0) * kSectorHalfWidth);
        r.aod_el.push_back(std::clamp(elev(rng), -kPi / 2, kPi / 2));
        r.aoa_az.push_back((2.0 * unit(rng) - 1.0) * kPi);
        r.aoa_el.push_back(std::clamp(elev(rng), -kPi / 2, kPi / 2));
        r.pol_phase.push_back(2.0 * kPi * unit(rng));
        const double phase = 2.0 * kPi * unit(rng);
        r.gain.push_back(std::polar(1.0, phase));
        power.push_back(0.0);
    }
    // Timing is aligned to the first arrival.
    const double t0 = *std::min_element(r.delay.begin(), r.delay.end());
    for (auto &t : r.delay)
        t -= t0;
    double total = 0.0;
    for (int l = 0; l < n; ++l)
    {
        const double mean_db = -kDecayDbPer100ns * r.delay[l] / 100e-9;
        if (r.los && l == 0)
            power[l] = std::pow(10.0, (mean_db + kLosBoostDb) / 10.0);
        else
            power[l] = std::pow(10.0, mean_db / 10.0) * fading(rng);
        total += power[l];
    }
    for (int l = 0; l < n; ++l)
        r.gain[l] *= std::sqrt(power[l] / total);
    return r;
}

Eigen::VectorXcd steering(const SimConfig &cfg, double az, double el, double pol_phase, double carrier_hz)
{
    // Half-wavelength spacing at the downlink carrier; the uplink sees the same geometry.
    const double k = kPi * carrier_hz / cfg.f_dl_hz;
    const double u = std::sin(az) * std::cos(el);
    const double v = std::sin(el);
    const std::size_t pols = cfg.dual_polarized ? 2 : 1;
    const cdouble xpol = std::polar(std::pow(10.0, -kCrossPolarDb / 20.0), pol_phase);
    Eigen::VectorXcd a(static_cast<Eigen::Index>(cfg.n_tx));
    for (std::size_t r = 0; r < cfg.array_rows; ++r)
        for (std::size_t c = 0; c < cfg.array_cols; ++c)
        {
            const cdouble e = std::polar(1.0, k * (static_cast<double>(c) * u + static_cast<double>(r) * v));
            const std::size_t elem = r * cfg.array_cols + c;
            a(static_cast<Eigen::Index>(elem * pols)) = e;
            if (pols == 2)
                a(static_cast<Eigen::Index>(elem * pols + 1)) = e * xpol;
        }
    return a;
}

ChannelMatrix rays_to_channel(const RaySet &rays, const SimConfig &cfg, double carrier_hz)
{
    cfg.validate();
    rays.validate(cfg);
    const auto L = static_cast<Eigen::Index>(rays.size());
    const auto nt = static_cast<Eigen::Index>(cfg.n_tx);
    const auto ns = static_cast<Eigen::Index>(cfg.n_sc);
    Eigen::MatrixXcd steer(nt, L);
    Eigen::MatrixXcd freq(L, ns);
    for (Eigen::Index l = 0; l < L; ++l)
    {
        const auto i = static_cast<std::size_t>(l);
        const double tau = rays.delay[i];
        const cdouble g = rays.gain[i] * std::polar(1.0, -2.0 * kPi * std::fmod(carrier_hz * tau, 1.0));
        steer.col(l) = g * steering(cfg, rays.aod_az[i], rays.aod_el[i], rays.pol_phase[i], carrier_hz);
        for (Eigen::Index n = 0; n < ns; ++n)
            freq(l, n) = std::polar(1.0, -2.0 * kPi * cfg.subcarrier_offset(static_cast<std::size_t>(n)) * tau);
    }
    return steer * freq;
}

RaySet uplink_rays(const RaySet &rays, const UplinkOptions &opt)
{
    RaySet up = rays;
    if (!opt.redraw_phases)
        return up;
    std::mt19937_64 rng(derive_seed(rays.seed, 0x75706c696e6bull));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto &g : up.gain)
        g = std::polar(std::abs(g), 2.0 * kPi * unit(rng));
    return up;
}

ChannelMatrix make_paired_uplink(const RaySet &rays, const SimConfig &cfg, const UplinkOptions &opt)
{
    return rays_to_channel(uplink_rays(rays, opt), cfg, cfg.f_ul_hz);
}

ChannelMatrix corrupt_estimate(const ChannelMatrix &h, double snr_db, std::uint64_t seed)
{
    if (snr_db == kPerfectCsi)
        return h;
    if (!std::isfinite(snr_db))
        throw SimError("corrupt_estimate: SNR must be finite or the perfect sentinel");
    const double energy = h.squaredNorm();
    if (!(energy > 0.0))
        throw SimError("corrupt_estimate: zero-norm channel");
    const double var = energy / static_cast<double>(h.size()) * std::pow(10.0, -snr_db / 10.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
    ChannelMatrix out = h;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
        {
            const double re = nd(rng);
            const double im = nd(rng);
            out(i, j) += cdouble(re, im);
        }
    return out;
}

void round_to_f32(ChannelMatrix &h)
{
    for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            h(i, j) = cdouble(static_cast<float>(h(i, j).real()), static_cast<float>(h(i, j).imag()));
}

} // namespace csiforge::sim
