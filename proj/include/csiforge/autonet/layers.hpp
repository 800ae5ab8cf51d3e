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

#include "csiforge/diffcore/graph.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace csiforge::net
{

class NetError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct Grid
{
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t tokens() const { return h * w; }
    bool operator==(const Grid &) const = default;
};

/// Owns parameters with stable addresses, in creation order.
class ParameterSet
{
public:
    diff::Parameter &add(const std::string &name, diff::Tensor value);

    std::vector<diff::Parameter *> list() const;
    diff::Parameter &get(const std::string &name) const;
    std::size_t scalar_count() const;
    std::size_t size() const { return params_.size(); }

    void zero_grad();
    void set_requires_grad(bool on);

private:
    std::vector<std::unique_ptr<diff::Parameter>> params_;
};

/// Seeded initializer; values are rounded to f32 so checkpoints reproduce them exactly.
class Initializer
{
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    diff::Tensor normal(diff::Shape shape, double std);
    std::mt19937_64 &rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

struct Linear
{
    diff::Parameter *w = nullptr;
    diff::Parameter *b = nullptr;

    Linear() = default;
    Linear(ParameterSet &ps, Initializer &init, const std::string &name, std::size_t in, std::size_t out,
           bool zero_init = false);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
    std::size_t in() const { return w->value.dim(0); }
    std::size_t out() const { return w->value.dim(1); }
};

struct LayerNorm
{
    diff::Parameter *gamma = nullptr;
    diff::Parameter *beta = nullptr;

    LayerNorm() = default;
    LayerNorm(ParameterSet &ps, const std::string &name, std::size_t dim);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
};

/// Multi-head self-attention inside non-overlapping windows of a token grid.
///
/// Windows are clamped to the grid per axis; grids that do not divide into
/// windows are zero-padded and padded keys are masked out. A shifted layer
/// cyclically rolls the grid by half a window (per axis) before partitioning
/// and rolls it back afterwards. A learned relative-position bias is shared
/// by all windows.
class WindowAttention
{
public:
    WindowAttention() = default;
    WindowAttention(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t dim,
                    std::size_t heads, std::size_t window, bool shifted);

    /// x: [B, H*W, C] -> [B, H*W, C]. When `weights` is given it receives the softmax output [B*nW*heads, L, L].
    diff::Var operator()(diff::Graph &g, const diff::Var &x, diff::Var *weights = nullptr) const;

    Grid window() const { return win_; }
    Grid shift() const { return shift_; }
    std::size_t window_count() const { return nwin_; }
    /// Multiply-accumulate count of one forward pass for `batch` grids.
    std::size_t macs(std::size_t batch) const;

private:
    Grid grid_, win_, shift_;
    std::size_t dim_ = 0, heads_ = 0, nwin_ = 0;
    Linear qkv_, proj_;
    diff::Parameter *bias_table_ = nullptr;
    diff::IndexMap partition_, unpartition_, bias_index_;
    std::optional<diff::Tensor> mask_;
};

/// Pre-norm residual block: attention then a GELU MLP.
class AttentionBlock
{
public:
    AttentionBlock() = default;
    AttentionBlock(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t dim,
                   std::size_t heads, std::size_t window, bool shifted, std::size_t mlp_ratio);

    diff::Var operator()(diff::Graph &g, const diff::Var &x, diff::Var *weights = nullptr) const;
    const WindowAttention &attention() const { return attn_; }

private:
    LayerNorm ln1_;
    WindowAttention attn_;
    LayerNorm ln2_;
    Linear fc1_, fc2_;
};

/// Alternating plain / shifted blocks at one resolution.
class Stage
{
public:
    Stage() = default;
    Stage(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t dim,
          std::size_t heads, std::size_t window, std::size_t depth, std::size_t mlp_ratio);

    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
    const std::vector<AttentionBlock> &blocks() const { return blocks_; }

private:
    std::vector<AttentionBlock> blocks_;
};

/// Concatenates each 2x2 neighbourhood and projects it: [B, H*W, C] -> [B, H/2*W/2, C_out].
class PatchMerge
{
public:
    PatchMerge() = default;
    PatchMerge(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t in_dim,
               std::size_t out_dim);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
    Grid output_grid() const { return {grid_.h / 2, grid_.w / 2}; }

private:
    Grid grid_;
    std::size_t in_dim_ = 0;
    diff::IndexMap index_;
    LayerNorm norm_;
    Linear proj_;
};

/// Inverse-shaped to PatchMerge: each token is projected to four tokens of a 2x finer grid.
class PatchSplit
{
public:
    PatchSplit() = default;
    PatchSplit(ParameterSet &ps, Initializer &init, const std::string &name, Grid grid, std::size_t in_dim,
               std::size_t out_dim);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
    Grid output_grid() const { return {grid_.h * 2, grid_.w * 2}; }

private:
    Grid grid_;
    std::size_t out_dim_ = 0;
    diff::IndexMap index_;
    Linear proj_;
};

/// Rows x cols plane with `depth` values per cell, cut into ph x pw patches.
struct PatchLayout
{
    std::size_t rows = 0, cols = 0, depth = 0;
    std::size_t ph = 0, pw = 0;

    Grid grid() const { return {(rows + ph - 1) / ph, (cols + pw - 1) / pw}; }
    std::size_t patch_len() const { return ph * pw * depth; }
};

/// [B, rows, cols, depth] -> [B, T, dim]; cells beyond the plane are zero.
class PatchEmbed
{
public:
    PatchEmbed() = default;
    PatchEmbed(ParameterSet &ps, Initializer &init, const std::string &name, PatchLayout layout, std::size_t dim);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;

private:
    PatchLayout layout_;
    diff::IndexMap index_;
    Linear proj_;
};

/// [B, T, dim] -> [B, rows, cols, depth].
class PatchUnembed
{
public:
    PatchUnembed() = default;
    PatchUnembed(ParameterSet &ps, Initializer &init, const std::string &name, PatchLayout layout, std::size_t dim);
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;

private:
    PatchLayout layout_;
    diff::IndexMap index_;
    Linear proj_;
};

/// Stage, merge, stage, ... over token grids.
struct HierarchyConfig
{
    Grid grid;
    std::vector<std::size_t> dims;  // one per stage
    std::vector<std::size_t> heads; // one per stage
    std::size_t window = 4;
    std::size_t depth = 2;
    std::size_t mlp_ratio = 2;

    /// Grid after each stage's input merge (index 0 is the input grid).
    std::vector<Grid> stage_grids() const;
    void validate() const;
};

class DownHierarchy
{
public:
    DownHierarchy() = default;
    DownHierarchy(ParameterSet &ps, Initializer &init, const std::string &name, HierarchyConfig cfg);
    /// [B, T0, dims[0]] -> [B, T_last, dims.back()].
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;
    Grid output_grid() const { return cfg_.stage_grids().back(); }
    const std::vector<Stage> &stages() const { return stages_; }

private:
    HierarchyConfig cfg_;
    std::vector<Stage> stages_;
    std::vector<PatchMerge> merges_;
};

/// Mirror of DownHierarchy: stages run from the coarsest grid back to cfg.grid.
class UpHierarchy
{
public:
    UpHierarchy() = default;
    UpHierarchy(ParameterSet &ps, Initializer &init, const std::string &name, HierarchyConfig cfg);
    /// [B, T_last, dims.back()] -> [B, T0, dims[0]].
    diff::Var operator()(diff::Graph &g, const diff::Var &x) const;

private:
    HierarchyConfig cfg_;
    std::vector<Stage> stages_; // coarsest first
    std::vector<PatchSplit> splits_;
};

} // namespace csiforge::net
