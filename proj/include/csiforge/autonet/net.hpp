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

#include "csiforge/autonet/layers.hpp"
#include "csiforge/chansim/channel.hpp"

#include <vector>

namespace csiforge::net
{

/// Encoder/decoder architecture. stage_dims has one entry per resolution
/// (merges = stage_dims.size() - 1); n_p is the per-token bottleneck width.
struct NetConfig
{
    std::vector<std::size_t> stage_dims;
    std::vector<std::size_t> heads;
    std::size_t n_p = 4;
    std::size_t window = 4;
    std::size_t patch_antennas = 2;
    std::size_t patch_subcarriers = 12;
    std::size_t depth = 2;
    std::size_t mlp_ratio = 2;

    /// [24, 32, 32, 32] with N_p = 4 (three merges).
    static NetConfig full();
    /// [16, 32, 32] with N_p = 12 (two merges).
    static NetConfig desk();
    static NetConfig profile(const std::string &name);

    std::size_t merges() const { return stage_dims.empty() ? 0 : stage_dims.size() - 1; }
    /// Patch grid (N_t / 2) x N_RB for the channel dimensions.
    Grid patch_grid(const sim::SimConfig &sim) const;
    /// Hierarchy over the patch grid; throws NetError when the dimensions do not fit.
    HierarchyConfig hierarchy(const sim::SimConfig &sim) const;
    /// Feature count N = tokens after the last merge times n_p.
    std::size_t features(const sim::SimConfig &sim) const;

    bool operator==(const NetConfig &) const = default;
};

/// Channel batch as a [B, N_t, N_s, 2] (re, im) tensor. With `normalize`,
/// each sample is scaled to unit mean entry power (zero channels are left as is).
diff::Tensor channels_to_tensor(const std::vector<const sim::ChannelMatrix *> &batch, bool normalize);

/// Sample b of a [B, N_t, N_s, 2] tensor.
sim::ChannelMatrix tensor_to_channel(const diff::Tensor &t, std::size_t b);

/// E: channel -> N real features.
class Encoder
{
public:
    Encoder(ParameterSet &ps, Initializer &init, const NetConfig &cfg, const sim::SimConfig &sim);

    /// h: [B, N_t, N_s, 2] -> [B, N].
    diff::Var operator()(diff::Graph &g, const diff::Var &h) const;
    /// Last-stage tokens before the bottleneck projection, [B, T, stage_dims.back()].
    diff::Var tokens(diff::Graph &g, const diff::Var &h) const;

    std::size_t features() const { return features_; }
    const DownHierarchy &hierarchy() const { return body_; }

private:
    sim::SimConfig sim_;
    std::size_t features_;
    std::size_t n_p_;
    PatchEmbed embed_;
    DownHierarchy body_;
    LayerNorm norm_;
    Linear bottleneck_;
};

/// C: N features -> channel.
class Decoder
{
public:
    Decoder(ParameterSet &ps, Initializer &init, const NetConfig &cfg, const sim::SimConfig &sim);

    /// z: [B, N] -> [B, N_t, N_s, 2].
    diff::Var operator()(diff::Graph &g, const diff::Var &z) const;
    /// Bottleneck expansion: [B, N] -> [B, T, stage_dims.back()].
    diff::Var expand(diff::Graph &g, const diff::Var &z) const;
    /// Remaining decoder from expanded tokens.
    diff::Var from_tokens(diff::Graph &g, const diff::Var &tokens) const;

    std::size_t features() const { return features_; }
    std::size_t token_count() const { return features_ / n_p_; }

private:
    sim::SimConfig sim_;
    std::size_t features_;
    std::size_t n_p_;
    std::size_t top_dim_;
    Linear expand_;
    UpHierarchy body_;
    LayerNorm norm_;
    PatchUnembed unembed_;
};

} // namespace csiforge::net
