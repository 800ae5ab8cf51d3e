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

#include "csiforge/autonet/net.hpp"
#include "csiforge/chansim/dataset.hpp"
#include "csiforge/fusion/fusion.hpp"
#include "csiforge/quantizer/bitstream.hpp"

#include "json.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace csiforge::train
{

/// Where the refiner sits: on the N quantized features, or on the decoder's
/// tokens right after its linear expansion (N_e = last stage width).
enum class FusionPoint
{
    features,
    expanded
};

struct FusionConfig
{
    fusion::ExtractorConfig extractor;
    fusion::RefinerConfig refiner;
    FusionPoint point = FusionPoint::features;
    std::size_t sensor_channels = 2;
    std::size_t sensor_rows = 0;
    std::size_t sensor_cols = 0;

    bool operator==(const FusionConfig &) const = default;
};

struct ModelConfig
{
    std::string profile = "desk";
    sim::SimConfig sim = sim::SimConfig::desk();
    net::NetConfig net = net::NetConfig::desk();
    int b_max = 3;
    std::optional<FusionConfig> fusion;

    /// Codec for the named channel profile ("desk" or "full"), no fusion.
    static ModelConfig for_profile(const std::string &name);
    /// Uplink-CSI fusion matching this channel profile.
    FusionConfig uplink_fusion(FusionPoint point = FusionPoint::features) const;

    std::size_t features() const { return net.features(sim); }
    /// Throws TrainError unless rate lies in [N, N * b_max].
    void check_rate(int rate) const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json &j);

    bool operator==(const ModelConfig &) const = default;
};

/// Encoder, trainable quantizer and decoder, plus the optional sensor
/// extractor and refiner. Parameter groups are the name prefixes "encoder",
/// "quantizer", "decoder", "extractor" and "fusion".
class CsiModel
{
public:
    CsiModel(const ModelConfig &cfg, std::uint64_t seed);
    CsiModel(const CsiModel &) = delete;
    CsiModel &operator=(const CsiModel &) = delete;

    const ModelConfig &config() const { return cfg_; }
    bool fused() const { return refiner_ != nullptr; }
    std::size_t features() const { return encoder_->features(); }

    std::vector<diff::Parameter *> parameters() const;
    std::vector<diff::Parameter *> group(const std::string &name) const;
    static const std::vector<std::string> &group_names();
    void set_group_trainable(const std::string &name, bool on);

    quant::QuantizerParams &quantizer() { return quant_; }
    const quant::QuantizerParams &quantizer() const { return quant_; }
    quant::BitAllocation allocation(int rate) const;

    /// [B, N_t, N_s, 2] -> [B, N].
    diff::Var encode(diff::Graph &g, const diff::Var &h) const;
    diff::Var boundaries(diff::Graph &g);
    /// Level sums for every row of z at one rate.
    diff::Var quantize(diff::Graph &g, const diff::Var &z, const diff::Var &bounds, int rate) const;
    /// [B, rows, cols, C] -> [B, T_d, N_e]; requires a fused model.
    diff::Var sensor_tokens(diff::Graph &g, const diff::Var &grid) const;
    /// Level sums [B, N] -> [B, N_t, N_s, 2]. With sensor tokens the refiner
    /// runs first; without them this is the wireless-only path.
    diff::Var decode(diff::Graph &g, const diff::Var &zq, const diff::Var *sensor = nullptr) const;

    /// Spreads boundaries over per-feature statistics of z rows [S, N].
    void init_quantizer(const diff::Tensor &z);

    /// Sensor grid for a sample: its own grid, else one built from its uplink estimate.
    sim::SensorGrid sensor_of(const sim::Sample &s) const;

private:
    ModelConfig cfg_;
    std::unique_ptr<net::ParameterSet> ps_;
    std::unique_ptr<net::Encoder> encoder_;
    std::unique_ptr<net::Decoder> decoder_;
    quant::QuantizerParams quant_;
    std::unique_ptr<fusion::SensorExtractor> extractor_;
    std::unique_ptr<fusion::Refiner> refiner_;
};

/// Features of a batch of channels (unit-power normalized, no graph recording).
diff::Tensor encode_features(CsiModel &model, const std::vector<const sim::ChannelMatrix *> &batch);

/// Feedback bits for one channel at a total length of `rate` bits.
quant::CsiBitstream encode_channel(CsiModel &model, const sim::ChannelMatrix &h, int rate);

/// Reconstruction from a bitstream; `sensor` selects the fused path.
sim::ChannelMatrix decode_channel(CsiModel &model, const quant::CsiBitstream &stream,
                                  const sim::SensorGrid *sensor = nullptr);

/// Batched reconstruction at one rate (same arithmetic as encode/decode_channel).
std::vector<sim::ChannelMatrix> reconstruct(CsiModel &model, const std::vector<const sim::ChannelMatrix *> &inputs,
                                            int rate, const std::vector<const sim::SensorGrid *> *sensors = nullptr);

} // namespace csiforge::train
