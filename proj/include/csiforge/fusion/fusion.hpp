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
#include "csiforge/chansim/dataset.hpp"

#include <string>
#include <vector>

namespace csiforge::fusion
{

using sim::Modality;
using sim::SensorGrid;

class FusionError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Sensor feature extractor g_E: patch embedding plus a windowed-attention
/// hierarchy, ending in a per-token projection to n_e.
struct ExtractorConfig
{
    std::size_t patch_h = 2;
    std::size_t patch_w = 12;
    std::vector<std::size_t> dims;
    std::vector<std::size_t> heads;
    std::size_t n_e = 4;
    std::size_t window = 4;
    std::size_t depth = 2;
    std::size_t mlp_ratio = 2;

    /// Uplink grid of the desk channel profile: 2x12 patches, two merges.
    static ExtractorConfig uplink_desk(std::size_t n_e);
    /// 32 x 576 uplink grid: 2x2 patches, three merges.
    static ExtractorConfig uplink_full(std::size_t n_e);
    /// 192 x 256 image: 3x4 patches, three merges.
    static ExtractorConfig image_full(std::size_t n_e);

    net::HierarchyConfig hierarchy(std::size_t rows, std::size_t cols) const;
    std::size_t tokens(std::size_t rows, std::size_t cols) const;
    /// Sensor feature length M.
    std::size_t features(std::size_t rows, std::size_t cols) const { return tokens(rows, cols) * n_e; }

    bool operator==(const ExtractorConfig &) const = default;
};

/// Sensor batch as [B, rows, cols, C]; uplink grids are scaled to unit mean power per sample.
diff::Tensor sensor_batch_tensor(const std::vector<const SensorGrid *> &batch);

class SensorExtractor
{
public:
    SensorExtractor(net::ParameterSet &ps, net::Initializer &init, const ExtractorConfig &cfg, std::size_t channels,
                    std::size_t rows, std::size_t cols);

    /// [B, rows, cols, C] -> [B, T_d, n_e].
    diff::Var tokens(diff::Graph &g, const diff::Var &grid) const;
    /// [B, rows, cols, C] -> [B, M].
    diff::Var operator()(diff::Graph &g, const diff::Var &grid) const;

    std::size_t token_count() const { return tokens_; }
    std::size_t features() const { return tokens_ * n_e_; }

private:
    std::size_t channels_, rows_, cols_, tokens_, n_e_;
    net::PatchEmbed embed_;
    net::DownHierarchy body_;
    net::LayerNorm norm_;
    net::Linear proj_;
};

struct RefinerConfig
{
    std::size_t embed = 4; // N_e
    std::size_t heads = 2;
    std::size_t mlp_ratio = 2;
    std::size_t depth = 1;

    bool operator==(const RefinerConfig &) const = default;
};

/// Multi-modal refinement transformer R.
///
/// Channel tokens Z_s [T_s, E] and sensor tokens Z_D [T_d, E] are stacked,
/// offset by a learned positional bias and passed through post-norm
/// attention blocks; the result is mixed back onto the T_s channel tokens
/// by W_r and added to Z_s. W_r starts at zero.
class Refiner
{
public:
    Refiner(net::ParameterSet &ps, net::Initializer &init, const RefinerConfig &cfg, std::size_t channel_tokens,
            std::size_t sensor_tokens);

    /// zs [B, T_s, E], zd [B, T_d, E] -> [B, T_s, E]. `weights` receives the
    /// softmax rows of the first block, [B*heads, T, T].
    diff::Var operator()(diff::Graph &g, const diff::Var &zs, const diff::Var &zd, diff::Var *weights = nullptr) const;

    /// Flat form: z_s [B, N], z_d [B, M] -> z_r [B, N] (N and M divisible by E).
    diff::Var refine_features(diff::Graph &g, const diff::Var &zs, const diff::Var &zd) const;

    std::size_t channel_tokens() const { return ts_; }
    std::size_t sensor_tokens() const { return td_; }
    std::size_t embed() const { return cfg_.embed; }
    diff::Parameter &w_r() const { return *w_r_; }

private:
    struct Block
    {
        diff::Parameter *wq, *wk, *wv, *wo;
        net::LayerNorm ln1, ln2;
        net::Linear fc1, fc2;
    };

    RefinerConfig cfg_;
    std::size_t ts_, td_;
    diff::Parameter *pos_ = nullptr;
    std::vector<Block> blocks_;
    diff::Parameter *w_r_ = nullptr;
};

inline constexpr std::uint32_t kSensorGridVersion = 1;

/// Standalone grid file: magic "CSIGRID1", u32 version, then the grid record.
void save_sensor_grid(const std::string &path, const SensorGrid &grid);
SensorGrid load_sensor_grid(const std::string &path);

} // namespace csiforge::fusion
