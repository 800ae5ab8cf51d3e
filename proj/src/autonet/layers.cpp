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

#include "csiforge/autonet/layers.hpp"
#include "csiforge/diffcore/ops.hpp"

#include <cmath>

namespace csiforge::net
{

using diff::IndexMap;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace
{

constexpr double kMasked = -1e9;

IndexMap make_index(std::vector<std::int64_t> v) { return std::make_shared<const std::vector<std::int64_t>>(std::move(v)); }

std::size_t batch_of(const Var &x, std::size_t per_item)
{
    if (per_item == 0 || x.size() % per_item != 0)
        throw diff::ShapeError("net", "input " + diff::to_string(x.shape()) + " is not a batch of " +
                                          std::to_string(per_item) + "-element items");
    return x.size() / per_item;
}

} // namespace

diff::Parameter &ParameterSet::add(const std::string &name, Tensor value)
{
    for (const auto &p : params_)
        if (p->name == name)
            throw NetError("duplicate parameter name '" + name + "'");
    params_.push_back(std::make_unique<diff::Parameter>(name, std::move(value)));
    return *params_.back();
}

std::vector<diff::Parameter *> ParameterSet::list() const
{
    std::vector<diff::Parameter *> out;
    for (const auto &p : params_)
        out.push_back(p.get());
    return out;
}

diff::Parameter &ParameterSet::get(const std::string &name) const
{
    for (const auto &p : params_)
        if (p->name == name)
            return *p;
    throw NetError("no parameter named '" + name + "'");
}

std::size_t ParameterSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto &p : params_)
        n += p->value.size();
    return n;
}

void ParameterSet::zero_grad()
{
    for (auto &p : params_)
        p->zero_grad();
}

void ParameterSet::set_requires_grad(bool on)
{
    for (auto &p : params_)
        p->requires_grad = on;
}

Tensor Initializer::normal(Shape shape, double std)
{
    Tensor t(std::move(shape));
    std::normal_distribution<double> nd(0.0, std);
    for (auto &v : t.storage())
        v = static_cast<float>(nd(rng_));
    return t;
}

Linear::Linear(ParameterSet &ps, Initializer &init, const std::string &name, std::size_t in, std::size_t out,
               bool zero_init)
{
    w = &ps.add(name + ".w", zero_init ? Tensor({in, out}) : init.normal({in, out}, 1.0 / std::sqrt(double(in))));
    b = &ps.add(name + ".b", Tensor({out}));
}

Var Linear::operator()(diff::Graph &g, const Var &x) const
{
    return diff::add_bias(diff::matmul(x, g.param(*w)), g.param(*b));
}

LayerNorm::LayerNorm(ParameterSet &ps, const std::string &name, std::size_t dim)
{
    gamma = &ps.add(name + ".gamma", Tensor({dim}, 1.0));
    beta = &ps.add(name + ".beta", Tensor({dim}));
}

Var LayerNorm::operator()(diff::Graph &g, const Var &x) const
{
    return diff::layer_norm(x, g.param(*gamma), g.param(*beta));
}

WindowAttention::WindowAttention(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid,
                                 std::size_t dim, std::size_t heads, std::size_t window, bool shifted)
    : grid_(grid), dim_(dim), heads_(heads)
{
    if (grid.h == 0 || grid.w == 0 || window == 0)
        throw NetError(name + ": empty grid or window");
    if (heads == 0 || dim % heads != 0)
        throw NetError(name + ": dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                       " heads");
    win_ = {std::min(window, grid.h), std::min(window, grid.w)};
    shift_ = shifted ? Grid{win_.h / 2, win_.w / 2} : Grid{0, 0};
    const std::size_t nh = (grid.h + win_.h - 1) / win_.h;
    const std::size_t nw = (grid.w + win_.w - 1) / win_.w;
    nwin_ = nh * nw;
    const std::size_t L = win_.tokens();

    std::vector<std::int64_t> part(nwin_ * L, -1), unpart(grid.tokens());
    std::vector<bool> padded(nwin_ * L, false);
    for (std::size_t a = 0; a < nh; ++a)
        for (std::size_t b = 0; b < nw; ++b)
            for (std::size_t p = 0; p < win_.h; ++p)
                for (std::size_t q = 0; q < win_.w; ++q)
                {
                    const std::size_t y = a * win_.h + p, x = b * win_.w + q;
                    const std::size_t row = (a * nw + b) * L + p * win_.w + q;
                    if (y >= grid.h || x >= grid.w)
                    {
                        padded[row] = true;
                        continue;
                    }
                    const std::size_t src = ((y + shift_.h) % grid.h) * grid.w + (x + shift_.w) % grid.w;
                    part[row] = static_cast<std::int64_t>(src);
                    unpart[src] = static_cast<std::int64_t>(row);
                }
    partition_ = make_index(std::move(part));
    unpartition_ = make_index(std::move(unpart));

    const std::size_t span_w = 2 * win_.w - 1;
    std::vector<std::int64_t> rel(L * L);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j)
        {
            const std::size_t dy = i / win_.w + win_.h - 1 - j / win_.w;
            const std::size_t dx = i % win_.w + win_.w - 1 - j % win_.w;
            rel[i * L + j] = static_cast<std::int64_t>(dy * span_w + dx);
        }
    bias_index_ = make_index(std::move(rel));

    if (std::find(padded.begin(), padded.end(), true) != padded.end())
    {
        Tensor m({nwin_, heads, L, L});
        for (std::size_t w = 0; w < nwin_; ++w)
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t i = 0; i < L; ++i)
                    for (std::size_t j = 0; j < L; ++j)
                        if (padded[w * L + j])
                            m[((w * heads + h) * L + i) * L + j] = kMasked;
        mask_ = std::move(m);
    }

    qkv_ = Linear(ps, init, name + ".qkv", dim, 3 * dim);
    proj_ = Linear(ps, init, name + ".proj", dim, dim);
    bias_table_ = &ps.add(name + ".rel_bias", Tensor({(2 * win_.h - 1) * span_w, heads}));
}

Var WindowAttention::operator()(diff::Graph &g, const Var &x, Var *weights) const
{
    const std::size_t B = batch_of(x, grid_.tokens() * dim_);
    const std::size_t L = win_.tokens();
    const std::size_t G = B * nwin_;
    const std::size_t d = dim_ / heads_;

    auto xw = diff::gather_rows(x, B, dim_, partition_, {G, L, dim_});
    auto qkv = diff::permute(diff::reshape(qkv_(g, xw), {G, L, 3, heads_, d}), {2, 0, 3, 1, 4});
    auto q = diff::reshape(diff::slice_rows(qkv, 0, 1), {G * heads_, L, d});
    auto k = diff::reshape(diff::slice_rows(qkv, 1, 2), {G * heads_, L, d});
    auto v = diff::reshape(diff::slice_rows(qkv, 2, 3), {G * heads_, L, d});

    auto scores = diff::scale(diff::bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(d)));
    auto bias = diff::permute(diff::gather_rows(g.param(*bias_table_), 1, heads_, bias_index_, {L, L, heads_}),
                              {2, 0, 1});
    scores = diff::add_bias(diff::reshape(scores, {G, heads_, L, L}), bias);
    if (mask_)
        scores = diff::add_bias(diff::reshape(scores, {B, nwin_, heads_, L, L}), g.constant(*mask_));
    auto attn = diff::reshape(diff::softmax(scores), {G * heads_, L, L});
    if (weights)
        *weights = attn;

    auto out = diff::reshape(diff::bmm(attn, v), {G, heads_, L, d});
    out = diff::reshape(diff::permute(out, {0, 2, 1, 3}), {G, L, dim_});
    out = proj_(g, out);
    return diff::gather_rows(out, B, dim_, unpartition_, {B, grid_.tokens(), dim_});
}

std::size_t WindowAttention::macs(std::size_t batch) const
{
    const std::size_t L = win_.tokens();
    const std::size_t padded_tokens = nwin_ * L;
    return batch * (padded_tokens * dim_ * 3 * dim_ + 2 * nwin_ * L * L * dim_ + padded_tokens * dim_ * dim_);
}

AttentionBlock::AttentionBlock(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid,
                               std::size_t dim, std::size_t heads, std::size_t window, bool shifted,
                               std::size_t mlp_ratio)
    : ln1_(ps, name + ".ln1", dim), attn_(ps, init, name + ".attn", grid, dim, heads, window, shifted),
      ln2_(ps, name + ".ln2", dim), fc1_(ps, init, name + ".fc1", dim, mlp_ratio * dim),
      fc2_(ps, init, name + ".fc2", mlp_ratio * dim, dim)
{
}

Var AttentionBlock::operator()(diff::Graph &g, const Var &x, Var *weights) const
{
    auto h = diff::add(x, attn_(g, ln1_(g, x), weights));
    return diff::add(h, fc2_(g, diff::gelu(fc1_(g, ln2_(g, h)))));
}

Stage::Stage(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t dim,
             std::size_t heads, std::size_t window, std::size_t depth, std::size_t mlp_ratio)
{
    for (std::size_t i = 0; i < depth; ++i)
        blocks_.emplace_back(ps, init, name + ".block" + std::to_string(i), grid, dim, heads, window, i % 2 == 1,
                             mlp_ratio);
}

Var Stage::operator()(diff::Graph &g, const Var &x) const
{
    Var h = x;
    for (const auto &b : blocks_)
        h = b(g, h);
    return h;
}

PatchMerge::PatchMerge(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t in_dim,
                       std::size_t out_dim)
    : grid_(grid), in_dim_(in_dim)
{
    if (grid.h % 2 != 0 || grid.w % 2 != 0 || grid.h == 0 || grid.w == 0)
        throw NetError(name + ": cannot merge odd grid " + std::to_string(grid.h) + "x" + std::to_string(grid.w));
    const Grid out = output_grid();
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < out.h; ++i)
        for (std::size_t j = 0; j < out.w; ++j)
            for (std::size_t di = 0; di < 2; ++di)
                for (std::size_t dj = 0; dj < 2; ++dj)
                    idx.push_back(static_cast<std::int64_t>((2 * i + di) * grid.w + 2 * j + dj));
    index_ = make_index(std::move(idx));
    norm_ = LayerNorm(ps, name + ".norm", 4 * in_dim);
    proj_ = Linear(ps, init, name + ".proj", 4 * in_dim, out_dim);
}

Var PatchMerge::operator()(diff::Graph &g, const Var &x) const
{
    const std::size_t B = batch_of(x, grid_.tokens() * in_dim_);
    auto cat = diff::gather_rows(x, B, in_dim_, index_, {B, output_grid().tokens(), 4 * in_dim_});
    return proj_(g, norm_(g, cat));
}

PatchSplit::PatchSplit(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t in_dim,
                       std::size_t out_dim)
    : grid_(grid), out_dim_(out_dim)
{
    const Grid out = output_grid();
    std::vector<std::int64_t> idx;
    for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x)
            idx.push_back(static_cast<std::int64_t>(((y / 2) * grid.w + x / 2) * 4 + (y % 2) * 2 + x % 2));
    index_ = make_index(std::move(idx));
    proj_ = Linear(ps, init, name + ".proj", in_dim, 4 * out_dim);
}

Var PatchSplit::operator()(diff::Graph &g, const Var &x) const
{
    auto u = proj_(g, x);
    const std::size_t B = batch_of(u, grid_.tokens() * 4 * out_dim_);
    return diff::gather_rows(u, B, out_dim_, index_, {B, output_grid().tokens(), out_dim_});
}

PatchEmbed::PatchEmbed(ParameterSet &ps, Initializer &init, const std::string &name, PatchLayout layout,
                       std::size_t dim)
    : layout_(layout)
{
    const Grid grid = layout.grid();
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < grid.h; ++i)
        for (std::size_t j = 0; j < grid.w; ++j)
            for (std::size_t a = 0; a < layout.ph; ++a)
                for (std::size_t b = 0; b < layout.pw; ++b)
                {
                    const std::size_t r = i * layout.ph + a, c = j * layout.pw + b;
                    idx.push_back(r < layout.rows && c < layout.cols ? static_cast<std::int64_t>(r * layout.cols + c)
                                                                     : -1);
                }
    index_ = make_index(std::move(idx));
    proj_ = Linear(ps, init, name + ".proj", layout.patch_len(), dim);
}

Var PatchEmbed::operator()(diff::Graph &g, const Var &x) const
{
    const std::size_t B = batch_of(x, layout_.rows * layout_.cols * layout_.depth);
    auto patches = diff::gather_rows(x, B, layout_.depth, index_, {B, layout_.grid().tokens(), layout_.patch_len()});
    return proj_(g, patches);
}

PatchUnembed::PatchUnembed(ParameterSet &ps, Initializer &init, const std::string &name, PatchLayout layout,
                           std::size_t dim)
    : layout_(layout)
{
    const Grid grid = layout.grid();
    std::vector<std::int64_t> idx;
    for (std::size_t r = 0; r < layout.rows; ++r)
        for (std::size_t c = 0; c < layout.cols; ++c)
        {
            const std::size_t t = (r / layout.ph) * grid.w + c / layout.pw;
            idx.push_back(static_cast<std::int64_t>(t * layout.ph * layout.pw + (r % layout.ph) * layout.pw +
                                                    c % layout.pw));
        }
    index_ = make_index(std::move(idx));
    proj_ = Linear(ps, init, name + ".proj", dim, layout.patch_len());
}

Var PatchUnembed::operator()(diff::Graph &g, const Var &x) const
{
    auto u = proj_(g, x);
    const std::size_t B = batch_of(u, layout_.grid().tokens() * layout_.patch_len());
    return diff::gather_rows(u, B, layout_.depth, index_, {B, layout_.rows, layout_.cols, layout_.depth});
}

std::vector<Grid> HierarchyConfig::stage_grids() const
{
    std::vector<Grid> out{grid};
    for (std::size_t i = 1; i < dims.size(); ++i)
        out.push_back({out.back().h / 2, out.back().w / 2});
    return out;
}

void HierarchyConfig::validate() const
{
    if (dims.empty() || dims.size() != heads.size())
        throw NetError("hierarchy: need one head count per stage");
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (dims[i] == 0 || heads[i] == 0 || dims[i] % heads[i] != 0)
            throw NetError("hierarchy: stage " + std::to_string(i) + " dim not divisible by its heads");
    const std::size_t f = std::size_t{1} << (dims.size() - 1);
    if (grid.h == 0 || grid.w == 0 || grid.h % f != 0 || grid.w % f != 0)
        throw NetError("hierarchy: token grid " + std::to_string(grid.h) + "x" + std::to_string(grid.w) +
                       " not divisible by " + std::to_string(f) + " for " + std::to_string(dims.size() - 1) +
                       " merges");
    if (window == 0 || depth == 0 || mlp_ratio == 0)
        throw NetError("hierarchy: window, depth and mlp ratio must be positive");
}

DownHierarchy::DownHierarchy(ParameterSet &ps, Initializer &init, const std::string &name, HierarchyConfig cfg)
    : cfg_(std::move(cfg))
{
    cfg_.validate();
    const auto grids = cfg_.stage_grids();
    for (std::size_t i = 0; i < cfg_.dims.size(); ++i)
    {
        if (i > 0)
            merges_.emplace_back(ps, init, name + ".merge" + std::to_string(i), grids[i - 1], cfg_.dims[i - 1],
                                 cfg_.dims[i]);
        stages_.emplace_back(ps, init, name + ".stage" + std::to_string(i), grids[i], cfg_.dims[i], cfg_.heads[i],
                             cfg_.window, cfg_.depth, cfg_.mlp_ratio);
    }
}

Var DownHierarchy::operator()(diff::Graph &g, const Var &x) const
{
    Var h = stages_[0](g, x);
    for (std::size_t i = 1; i < stages_.size(); ++i)
        h = stages_[i](g, merges_[i - 1](g, h));
    return h;
}

UpHierarchy::UpHierarchy(ParameterSet &ps, Initializer &init, const std::string &name, HierarchyConfig cfg)
    : cfg_(std::move(cfg))
{
    cfg_.validate();
    const auto grids = cfg_.stage_grids();
    for (std::size_t i = cfg_.dims.size(); i-- > 0;)
    {
        stages_.emplace_back(ps, init, name + ".stage" + std::to_string(i), grids[i], cfg_.dims[i], cfg_.heads[i],
                             cfg_.window, cfg_.depth, cfg_.mlp_ratio);
        if (i > 0)
            splits_.emplace_back(ps, init, name + ".split" + std::to_string(i), grids[i], cfg_.dims[i],
                                 cfg_.dims[i - 1]);
    }
}

Var UpHierarchy::operator()(diff::Graph &g, const Var &x) const
{
    Var h = stages_[0](g, x);
    for (std::size_t i = 1; i < stages_.size(); ++i)
        h = stages_[i](g, splits_[i - 1](g, h));
    return h;
}

} // namespace csiforge::net
