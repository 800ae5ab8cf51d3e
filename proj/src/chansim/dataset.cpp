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

#include "csiforge/chansim/dataset.hpp"
#include "csiforge/common/seed.hpp"

#include <cmath>

namespace csiforge::sim
{

namespace
{

constexpr char kMagic[] = "CSIFORGE";

enum : std::uint8_t
{
    kHasDownlink = 1,
    kHasUplink = 2,
    kHasSensor = 4
};

void put_config(BinaryWriter &w, const SimConfig &c)
{
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.n_tx));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.n_rb));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.n_sc));
    w.put<double>(c.scs_hz);
    w.put<double>(c.f_dl_hz);
    w.put<double>(c.f_ul_hz);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.fft_size));
    w.put<double>(c.sample_rate_hz);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.array_rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.array_cols));
    w.put<std::uint8_t>(c.dual_polarized ? 1 : 0);
}

SimConfig get_config(BinaryReader &r)
{
    SimConfig c;
    c.n_tx = r.get<std::uint32_t>();
    c.n_rb = r.get<std::uint32_t>();
    c.n_sc = r.get<std::uint32_t>();
    c.scs_hz = r.get<double>();
    c.f_dl_hz = r.get<double>();
    c.f_ul_hz = r.get<double>();
    c.fft_size = r.get<std::uint32_t>();
    c.sample_rate_hz = r.get<double>();
    c.array_rows = r.get<std::uint32_t>();
    c.array_cols = r.get<std::uint32_t>();
    c.dual_polarized = r.get<std::uint8_t>() != 0;
    try
    {
        c.validate();
    }
    catch (const SimError &e)
    {
        throw FormatError(FormatError::Kind::corrupt, r.context() + ": " + e.what());
    }
    return c;
}

// Antenna-major interleaved (re, im) f32.
void put_grid(BinaryWriter &w, const ChannelMatrix &h)
{
    for (Eigen::Index t = 0; t < h.rows(); ++t)
        for (Eigen::Index n = 0; n < h.cols(); ++n)
        {
            w.put<float>(static_cast<float>(h(t, n).real()));
            w.put<float>(static_cast<float>(h(t, n).imag()));
        }
}

ChannelMatrix get_grid(BinaryReader &r, const SimConfig &c)
{
    r.checked_size(static_cast<std::uint64_t>(c.n_tx) * c.n_sc, 2 * sizeof(float));
    ChannelMatrix h(static_cast<Eigen::Index>(c.n_tx), static_cast<Eigen::Index>(c.n_sc));
    for (Eigen::Index t = 0; t < h.rows(); ++t)
        for (Eigen::Index n = 0; n < h.cols(); ++n)
        {
            const float re = r.get<float>();
            const float im = r.get<float>();
            h(t, n) = cdouble(re, im);
        }
    return h;
}

void put_rays(BinaryWriter &w, const RaySet &rays)
{
    w.put<std::uint8_t>(rays.los ? 1 : 0);
    w.put<std::uint64_t>(rays.seed);
    std::vector<double> re, im;
    for (const auto &g : rays.gain)
    {
        re.push_back(g.real());
        im.push_back(g.imag());
    }
    w.put_f64_array(re);
    w.put_f64_array(im);
    w.put_f64_array(rays.delay);
    w.put_f64_array(rays.aod_az);
    w.put_f64_array(rays.aod_el);
    w.put_f64_array(rays.aoa_az);
    w.put_f64_array(rays.aoa_el);
    w.put_f64_array(rays.pol_phase);
}

RaySet get_rays(BinaryReader &r)
{
    RaySet rays;
    rays.los = r.get<std::uint8_t>() != 0;
    rays.seed = r.get<std::uint64_t>();
    const auto re = r.get_f64_array();
    const auto im = r.get_f64_array();
    if (re.size() != im.size())
        throw FormatError(FormatError::Kind::corrupt, r.context() + ": gain arrays differ in length");
    for (std::size_t i = 0; i < re.size(); ++i)
        rays.gain.emplace_back(re[i], im[i]);
    rays.delay = r.get_f64_array();
    rays.aod_az = r.get_f64_array();
    rays.aod_el = r.get_f64_array();
    rays.aoa_az = r.get_f64_array();
    rays.aoa_el = r.get_f64_array();
    rays.pol_phase = r.get_f64_array();
    return rays;
}

} // namespace

void SensorGrid::validate() const
{
    if (channels == 0 || rows == 0 || cols == 0)
        throw SimError("SensorGrid: empty dimensions");
    if (values.size() != channels * rows * cols)
        throw SimError("SensorGrid: value count does not match dimensions");
    if (patch_h == 0 || patch_w == 0)
        throw SimError("SensorGrid: zero patch size");
    for (float v : values)
        if (!std::isfinite(v))
            throw SimError("SensorGrid: non-finite value");
}

SensorGrid uplink_sensor_grid(const ChannelMatrix &h, std::size_t patch_h, std::size_t patch_w)
{
    SensorGrid g;
    g.modality = Modality::uplink_csi;
    g.channels = 2;
    g.rows = static_cast<std::size_t>(h.rows());
    g.cols = static_cast<std::size_t>(h.cols());
    g.patch_h = patch_h;
    g.patch_w = patch_w;
    g.values.resize(2 * g.rows * g.cols);
    for (std::size_t t = 0; t < g.rows; ++t)
        for (std::size_t n = 0; n < g.cols; ++n)
        {
            const auto v = h(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
            g.values[t * g.cols + n] = static_cast<float>(v.real());
            g.values[(g.rows + t) * g.cols + n] = static_cast<float>(v.imag());
        }
    return g;
}

void write_sensor_grid(BinaryWriter &w, const SensorGrid &g)
{
    w.put<std::uint8_t>(static_cast<std::uint8_t>(g.modality));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.cols));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.patch_h));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.patch_w));
    w.put_bytes(g.values.data(), g.values.size() * sizeof(float));
}

SensorGrid read_sensor_grid(BinaryReader &r)
{
    SensorGrid g;
    const auto m = r.get<std::uint8_t>();
    if (m > 1)
        throw FormatError(FormatError::Kind::corrupt, r.context() + ": unknown sensor modality");
    g.modality = static_cast<Modality>(m);
    g.channels = r.get<std::uint32_t>();
    g.rows = r.get<std::uint32_t>();
    g.cols = r.get<std::uint32_t>();
    g.patch_h = r.get<std::uint32_t>();
    g.patch_w = r.get<std::uint32_t>();
    g.values.resize(r.checked_size(static_cast<std::uint64_t>(g.channels) * g.rows * g.cols, sizeof(float)));
    r.get_bytes(g.values.data(), g.values.size() * sizeof(float));
    return g;
}

void serialize_dataset(BinaryWriter &w, const Dataset &data)
{
    w.put_bytes(kMagic, 8);
    w.put<std::uint32_t>(kDatasetVersion);
    put_config(w, data.config);
    w.put<std::uint64_t>(data.samples.size());
    const auto nt = static_cast<Eigen::Index>(data.config.n_tx);
    const auto ns = static_cast<Eigen::Index>(data.config.n_sc);
    for (const auto &s : data.samples)
    {
        auto check = [&](const ChannelMatrix &h) {
            if (h.rows() != nt || h.cols() != ns)
                throw SimError("write_dataset: channel shape does not match SimConfig");
        };
        check(s.downlink);
        std::uint8_t mask = kHasDownlink;
        if (s.uplink)
        {
            check(*s.uplink);
            mask |= kHasUplink;
        }
        if (s.sensor)
            mask |= kHasSensor;
        w.put<std::uint8_t>(mask);
        put_grid(w, s.downlink);
        if (s.uplink)
            put_grid(w, *s.uplink);
        if (s.sensor)
            write_sensor_grid(w, *s.sensor);
        put_rays(w, s.rays);
    }
}

Dataset deserialize_dataset(BinaryReader &r)
{
    r.expect_magic(std::string(kMagic, 8));
    const auto version = r.get<std::uint32_t>();
    if (version != kDatasetVersion)
        throw FormatError(FormatError::Kind::unsupported_version,
                          r.context() + ": unsupported version " + std::to_string(version));
    Dataset d;
    d.config = get_config(r);
    const auto count = r.get<std::uint64_t>();
    // Every record holds at least a mask byte and the downlink grid.
    r.checked_size(count, 1 + d.config.n_tx * d.config.n_sc * 2 * sizeof(float));
    d.samples.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i)
    {
        Sample s;
        const auto mask = r.get<std::uint8_t>();
        if (!(mask & kHasDownlink) || (mask & ~(kHasDownlink | kHasUplink | kHasSensor)))
            throw FormatError(FormatError::Kind::corrupt, r.context() + ": bad modality mask in record " +
                                                              std::to_string(i));
        s.downlink = get_grid(r, d.config);
        if (mask & kHasUplink)
            s.uplink = get_grid(r, d.config);
        if (mask & kHasSensor)
            s.sensor = read_sensor_grid(r);
        s.rays = get_rays(r);
        d.samples.push_back(std::move(s));
    }
    if (r.remaining() != 0)
        throw FormatError(FormatError::Kind::corrupt,
                          r.context() + ": " + std::to_string(r.remaining()) + " trailing bytes after last record");
    return d;
}

void write_dataset(const std::string &path, const Dataset &data)
{
    BinaryWriter w;
    serialize_dataset(w, data);
    w.save(path);
}

Dataset read_dataset(const std::string &path)
{
    auto r = BinaryReader::from_file(path);
    return deserialize_dataset(r);
}

Dataset generate_dataset(const SimConfig &cfg, const GenOptions &opt)
{
    cfg.validate();
    Dataset d;
    d.config = cfg;
    d.samples.reserve(opt.count);
    for (std::size_t i = 0; i < opt.count; ++i)
    {
        const auto seed = derive_seed(opt.seed, i);
        Sample s;
        s.rays = sample_rayset(cfg, seed, opt.los_probability);
        s.downlink = rays_to_channel(s.rays, cfg, cfg.f_dl_hz);
        round_to_f32(s.downlink);
        if (opt.with_uplink)
        {
            auto ul = corrupt_estimate(make_paired_uplink(s.rays, cfg), opt.uplink_snr_db, derive_seed(seed, 1));
            round_to_f32(ul);
            s.uplink = std::move(ul);
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

} // namespace csiforge::sim
