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

#include "csiforge/fusion/fusion.hpp"
#include "csiforge/diffcore/ops.hpp"

#include <cmath>

namespace csiforge::fusion
{

using diff::Tensor;
using diff::Var;

ExtractorConfig ExtractorConfig::uplink_desk(std::size_t n_e)
{
    ExtractorConfig c;
    c.patch_h = 2;
    c.patch_w = 12;
    c.dims = {16, 32, 32};
    c.heads = {2, 4, 4};
    c.n_e = n_e;
    return c;
}

ExtractorConfig ExtractorConfig::uplink_full(std::size_t n_e)
{
    ExtractorConfig c;
    c.patch_h = 2;
    c.patch_w = 2;
    c.dims = {16, 32, 32, 32};
    c.heads = {2, 4, 4, 4};
    c.n_e = n_e;
    return c;
}

ExtractorConfig ExtractorConfig::image_full(std::size_t n_e)
{
    ExtractorConfig c = uplink_full(n_e);
    c.patch_h = 3;
    c.patch_w = 4;
    return c;
}

net::HierarchyConfig ExtractorConfig::hierarchy(std::size_t rows, std::size_t cols) const
{
    if (patch_h == 0 || patch_w == 0 || n_e == 0)
        throw FusionError("extractor: zero patch size or embedding");
    net::HierarchyConfig h;
    h.grid = {(rows + patch_h - 1) / patch_h, (cols + patch_w - 1) / patch_w};
    h.dims = dims;
    h.heads = heads;
    h.window = window;
    h.depth = depth;
    h.mlp_ratio = mlp_ratio;
    try
    {
        h.validate();
    }
    catch (const net::NetError &e)
    {
        throw FusionError(std::string("extractor: ") + e.what());
    }
    return h;
}

std::size_t ExtractorConfig::tokens(std::size_t rows, std::size_t cols) const
{
    return hierarchy(rows, cols).stage_grids().back().tokens();
}

Tensor sensor_batch_tensor(const std::vector<const SensorGrid *> &batch)
{
    if (batch.empty())
        throw FusionError("sensor_batch_tensor: empty batch");
    const auto &f = *batch[0];
    Tensor t({batch.size(), f.rows, f.cols, f.channels});
    for (std::size_t b = 0; b < batch.size(); ++b)
    {
        const auto &s = *batch[b];
        s.validate();
        if (s.rows != f.rows || s.cols != f.cols || s.channels != f.channels)
            throw FusionError("sensor_batch_tensor: grids differ in shape");
        double scale = 1.0;
        if (s.modality == Modality::uplink_csi)
        {
            double p = 0.0;
            for (float v : s.values)
                p += double(v) * double(v);
            p /= static_cast<double>(s.values.size()) / static_cast<double>(s.channels);
            if (p > 0.0)
                scale = 1.0 / std::sqrt(p);
        }
        double *out = t.ptr() + b * s.values.size();
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t r = 0; r < s.rows; ++r)
                for (std::size_t k = 0; k < s.cols; ++k)
                    out[(r * s.cols + k) * s.channels + c] = s.at(c, r, k) * scale;
    }
    return t;
}

SensorExtractor::SensorExtractor(net::ParameterSet &ps, net::Initializer &init, const ExtractorConfig &cfg,
                                 std::size_t channels, std::size_t rows, std::size_t cols)
    : channels_(channels), rows_(rows), cols_(cols), tokens_(cfg.tokens(rows, cols)), n_e_(cfg.n_e),
      embed_(ps, init, "extractor.embed", {rows, cols, channels, cfg.patch_h, cfg.patch_w}, cfg.dims.front()),
      body_(ps, init, "extractor", cfg.hierarchy(rows, cols)), norm_(ps, "extractor.norm", cfg.dims.back()),
      proj_(ps, init, "extractor.proj", cfg.dims.back(), cfg.n_e)
{
}

Var SensorExtractor::tokens(diff::Graph &g, const Var &grid) const
{
    const auto &s = grid.shape();
    if (s.size() != 4 || s[1] != rows_ || s[2] != cols_ || s[3] != channels_)
        throw diff::ShapeError("extract_sensor_features", "expected [B, " + std::to_string(rows_) + ", " +
                                                              std::to_string(cols_) + ", " +
                                                              std::to_string(channels_) + "], got " +
                                                              diff::to_string(s));
    return proj_(g, norm_(g, body_(g, embed_(g, grid))));
}

Var SensorExtractor::operator()(diff::Graph &g, const Var &grid) const
{
    return diff::reshape(tokens(g, grid), {grid.shape()[0], features()});
}

Refiner::Refiner(net::ParameterSet &ps, net::Initializer &init, const RefinerConfig &cfg,
                 std::size_t channel_tokens, std::size_t sensor_tokens)
    : cfg_(cfg), ts_(channel_tokens), td_(sensor_tokens)
{
    const std::size_t E = cfg.embed;
    if (E == 0 || cfg.heads == 0 || E % cfg.heads != 0)
        throw FusionError("refiner: embedding " + std::to_string(E) + " not divisible by " +
                          std::to_string(cfg.heads) + " heads");
    if (ts_ == 0 || td_ == 0 || cfg.depth == 0)
        throw FusionError("refiner: empty token set or zero depth");
    const std::size_t T = ts_ + td_;
    const double s = 1.0 / std::sqrt(static_cast<double>(E));
    pos_ = &ps.add("fusion.pos", Tensor({T, E}));
    for (std::size_t i = 0; i < cfg.depth; ++i)
    {
        const std::string n = "fusion.block" + std::to_string(i);
        Block b{&ps.add(n + ".wq", init.normal({E, E}, s)),
                &ps.add(n + ".wk", init.normal({E, E}, s)),
                &ps.add(n + ".wv", init.normal({E, E}, s)),
                &ps.add(n + ".wo", init.normal({E, E}, s)),
                net::LayerNorm(ps, n + ".ln1", E),
                net::LayerNorm(ps, n + ".ln2", E),
                net::Linear(ps, init, n + ".fc1", E, cfg.mlp_ratio * E),
                net::Linear(ps, init, n + ".fc2", cfg.mlp_ratio * E, E)};
        blocks_.push_back(b);
    }
    w_r_ = &ps.add("fusion.w_r", Tensor({T, ts_}));
}

Var Refiner::operator()(diff::Graph &g, const Var &zs, const Var &zd, Var *weights) const
{
    const std::size_t E = cfg_.embed, T = ts_ + td_, H = cfg_.heads, d = E / H;
    const auto &ss = zs.shape();
    const auto &ds = zd.shape();
    if (ss.size() != 3 || ss[1] != ts_ || ss[2] != E || ds.size() != 3 || ds[0] != ss[0] || ds[1] != td_ ||
        ds[2] != E)
        throw diff::ShapeError("refine_features", "expected [B, " + std::to_string(ts_) + ", " + std::to_string(E) +
                                                      "] and [B, " + std::to_string(td_) + ", " + std::to_string(E) +
                                                      "], got " + diff::to_string(ss) + " and " +
                                                      diff::to_string(ds));
    const std::size_t B = ss[0];
    auto z = diff::add_bias(diff::concat({zs, zd}, 1), g.param(*pos_));
    for (std::size_t i = 0; i < blocks_.size(); ++i)
    {
        const auto &b = blocks_[i];
        auto heads = [&](diff::Parameter *w) {
            auto p = diff::reshape(diff::matmul(z, g.param(*w)), {B, T, H, d});
            return diff::reshape(diff::permute(p, {0, 2, 1, 3}), {B * H, T, d});
        };
        auto q = heads(b.wq), k = heads(b.wk), v = heads(b.wv);
        auto attn = diff::softmax(diff::scale(diff::bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(d))));
        if (weights && i == 0)
            *weights = attn;
        auto o = diff::reshape(diff::permute(diff::reshape(diff::bmm(attn, v), {B, H, T, d}), {0, 2, 1, 3}),
                               {B, T, E});
        auto z1 = b.ln1(g, diff::add(z, diff::matmul(o, g.param(*b.wo))));
        z = b.ln2(g, diff::add(b.fc2(g, diff::gelu(b.fc1(g, z1))), z1));
    }
    // Token mixing: [B, T, E] -> [B, E, T] x [T, T_s] -> [B, T_s, E].
    auto mixed = diff::matmul(diff::permute(z, {0, 2, 1}), g.param(*w_r_));
    return diff::add(zs, diff::permute(mixed, {0, 2, 1}));
}

Var Refiner::refine_features(diff::Graph &g, const Var &zs, const Var &zd) const
{
    const std::size_t E = cfg_.embed;
    if (zs.shape().size() != 2 || zd.shape().size() != 2 || zs.shape()[1] % E != 0 || zd.shape()[1] % E != 0)
        throw diff::ShapeError("refine_features", "feature lengths must be divisible by " + std::to_string(E));
    const std::size_t B = zs.shape()[0], N = zs.shape()[1];
    auto r = (*this)(g, diff::reshape(zs, {B, N / E, E}), diff::reshape(zd, {B, zd.shape()[1] / E, E}));
    return diff::reshape(r, {B, N});
}

void save_sensor_grid(const std::string &path, const SensorGrid &grid)
{
    grid.validate();
    BinaryWriter w;
    w.put_bytes("CSIGRID1", 8);
    w.put<std::uint32_t>(kSensorGridVersion);
    sim::write_sensor_grid(w, grid);
    w.save(path);
}

SensorGrid load_sensor_grid(const std::string &path)
{
    auto r = BinaryReader::from_file(path);
    r.expect_magic("CSIGRID1");
    const auto v = r.get<std::uint32_t>();
    if (v != kSensorGridVersion)
        throw FormatError(FormatError::Kind::unsupported_version, path + ": unsupported version " + std::to_string(v));
    auto g = sim::read_sensor_grid(r);
    if (r.remaining() != 0)
        throw FormatError(FormatError::Kind::corrupt, path + ": trailing bytes");
    try
    {
        g.validate();
    }
    catch (const sim::SimError &e)
    {
        throw FormatError(FormatError::Kind::corrupt, path + ": " + e.what());
    }
    return g;
}

} // namespace csiforge::fusion
