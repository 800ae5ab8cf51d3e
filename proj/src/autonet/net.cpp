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

#include "csiforge/autonet/net.hpp"
#include "csiforge/diffcore/ops.hpp"

#include <cmath>

namespace csiforge::net
{

using diff::Tensor;
using diff::Var;

NetConfig NetConfig::full()
{
    NetConfig c;
    c.stage_dims = {24, 32, 32, 32};
    c.heads = {2, 4, 4, 4};
    c.n_p = 4;
    return c;
}

NetConfig NetConfig::desk()
{
    NetConfig c;
    c.stage_dims = {16, 32, 32};
    c.heads = {2, 4, 4};
    c.n_p = 12;
    return c;
}

NetConfig NetConfig::profile(const std::string &name)
{
    if (name == "full")
        return full();
    if (name == "desk")
        return desk();
    throw NetError("unknown network profile '" + name + "'");
}

Grid NetConfig::patch_grid(const sim::SimConfig &sim) const
{
    if (patch_antennas == 0 || patch_subcarriers == 0 || sim.n_tx % patch_antennas != 0 ||
        sim.n_sc % patch_subcarriers != 0)
        throw NetError("channel " + std::to_string(sim.n_tx) + "x" + std::to_string(sim.n_sc) +
                       " does not divide into " + std::to_string(patch_antennas) + "x" +
                       std::to_string(patch_subcarriers) + " patches");
    return {sim.n_tx / patch_antennas, sim.n_sc / patch_subcarriers};
}

HierarchyConfig NetConfig::hierarchy(const sim::SimConfig &sim) const
{
    HierarchyConfig h;
    h.grid = patch_grid(sim);
    h.dims = stage_dims;
    h.heads = heads;
    h.window = window;
    h.depth = depth;
    h.mlp_ratio = mlp_ratio;
    h.validate();
    if (n_p == 0)
        throw NetError("n_p must be positive");
    return h;
}

std::size_t NetConfig::features(const sim::SimConfig &sim) const
{
    return hierarchy(sim).stage_grids().back().tokens() * n_p;
}

Tensor channels_to_tensor(const std::vector<const sim::ChannelMatrix *> &batch, bool normalize)
{
    if (batch.empty())
        throw NetError("channels_to_tensor: empty batch");
    const auto nt = static_cast<std::size_t>(batch[0]->rows());
    const auto ns = static_cast<std::size_t>(batch[0]->cols());
    Tensor t({batch.size(), nt, ns, 2});
    for (std::size_t b = 0; b < batch.size(); ++b)
    {
        const auto &h = *batch[b];
        if (static_cast<std::size_t>(h.rows()) != nt || static_cast<std::size_t>(h.cols()) != ns)
            throw NetError("channels_to_tensor: channels differ in shape");
        double s = 1.0;
        if (normalize)
        {
            const double p = h.squaredNorm() / static_cast<double>(h.size());
            if (p > 0.0)
                s = 1.0 / std::sqrt(p);
        }
        double *out = t.ptr() + b * nt * ns * 2;
        for (std::size_t i = 0; i < nt; ++i)
            for (std::size_t n = 0; n < ns; ++n)
            {
                const auto v = h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n));
                out[(i * ns + n) * 2] = v.real() * s;
                out[(i * ns + n) * 2 + 1] = v.imag() * s;
            }
    }
    return t;
}

sim::ChannelMatrix tensor_to_channel(const Tensor &t, std::size_t b)
{
    if (t.rank() != 4 || t.dim(3) != 2 || b >= t.dim(0))
        throw NetError("tensor_to_channel: expected [B, N_t, N_s, 2], got " + diff::to_string(t.shape()));
    const std::size_t nt = t.dim(1), ns = t.dim(2);
    sim::ChannelMatrix h(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(ns));
    const double *p = t.ptr() + b * nt * ns * 2;
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t n = 0; n < ns; ++n)
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = {p[(i * ns + n) * 2],
                                                                             p[(i * ns + n) * 2 + 1]};
    return h;
}

namespace
{

PatchLayout channel_layout(const NetConfig &cfg, const sim::SimConfig &sim)
{
    return {sim.n_tx, sim.n_sc, 2, cfg.patch_antennas, cfg.patch_subcarriers};
}

} // namespace

Encoder::Encoder(ParameterSet &ps, Initializer &init, const NetConfig &cfg, const sim::SimConfig &sim)
    : sim_(sim), features_(cfg.features(sim)), n_p_(cfg.n_p),
      embed_(ps, init, "encoder.embed", channel_layout(cfg, sim), cfg.stage_dims.front()),
      body_(ps, init, "encoder", cfg.hierarchy(sim)), norm_(ps, "encoder.norm", cfg.stage_dims.back()),
      bottleneck_(ps, init, "encoder.bottleneck", cfg.stage_dims.back(), cfg.n_p)
{
}

Var Encoder::tokens(diff::Graph &g, const Var &h) const
{
    const auto &s = h.shape();
    if (s.size() != 4 || s[1] != sim_.n_tx || s[2] != sim_.n_sc || s[3] != 2)
        throw diff::ShapeError("encode_features", "expected [B, " + std::to_string(sim_.n_tx) + ", " +
                                                      std::to_string(sim_.n_sc) + ", 2], got " + diff::to_string(s));
    return body_(g, embed_(g, h));
}

Var Encoder::operator()(diff::Graph &g, const Var &h) const
{
    auto t = bottleneck_(g, norm_(g, tokens(g, h)));
    return diff::reshape(t, {h.shape()[0], features_});
}

Decoder::Decoder(ParameterSet &ps, Initializer &init, const NetConfig &cfg, const sim::SimConfig &sim)
    : sim_(sim), features_(cfg.features(sim)), n_p_(cfg.n_p), top_dim_(cfg.stage_dims.back()),
      expand_(ps, init, "decoder.expand", cfg.n_p, cfg.stage_dims.back()),
      body_(ps, init, "decoder", cfg.hierarchy(sim)), norm_(ps, "decoder.norm", cfg.stage_dims.front()),
      unembed_(ps, init, "decoder.unembed", channel_layout(cfg, sim), cfg.stage_dims.front())
{
}

Var Decoder::expand(diff::Graph &g, const Var &z) const
{
    const auto &s = z.shape();
    if (s.size() != 2 || s[1] != features_)
        throw diff::ShapeError("decode_channel",
                               "expected [B, " + std::to_string(features_) + "], got " + diff::to_string(s));
    return expand_(g, diff::reshape(z, {s[0], token_count(), n_p_}));
}

Var Decoder::from_tokens(diff::Graph &g, const Var &tokens) const
{
    return unembed_(g, norm_(g, body_(g, tokens)));
}

Var Decoder::operator()(diff::Graph &g, const Var &z) const { return from_tokens(g, expand(g, z)); }

} // namespace csiforge::net
