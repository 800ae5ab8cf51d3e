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

#include "csiforge/chansim/channel.hpp"
#include "csiforge/trainer/checkpoint.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace csiforge::train
{

struct TrainConfig
{
    std::vector<int> rates{48, 72, 96, 120, 144};
    double gamma = std::exp2(1.0 / 96.0);
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::string stage = "stage1";
    /// Input corruption during training; +inf trains on perfect CSI.
    double input_snr_db = sim::kPerfectCsi;
    double val_fraction = 0.1;
    double clip_norm = 5.0;
    std::uint64_t seed = 1;
    /// Append-only CSV (epoch,rate,train_loss,val_loss); empty disables it.
    std::string log_path;
    /// Stage 2: start the sensor extractor from the stage-1 encoder weights
    /// when the two have the same layout (uplink CSI on the channel grid).
    bool warm_start_extractor = true;
    /// Called after every epoch, including the pre-training evaluation (epoch 0).
    std::function<void(const struct EpochRecord &)> on_epoch;

    /// gamma > 1, batch and rates valid for the model.
    void validate(const ModelConfig &model) const;
};

struct EpochRecord
{
    std::size_t epoch = 0;
    std::vector<double> train_loss; // per rate, empty for epoch 0
    std::vector<double> val_loss;   // per rate
    double val_weighted = 0.0;
    double seconds = 0.0;
};

struct TrainResult
{
    Checkpoint checkpoint; // best validation epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::vector<std::size_t> train_indices, val_indices;
    bool extractor_warm_start = false;
};

/// Deterministic split of [0, n) into (train, validation) by seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed);

/// Mean reconstruction loss per rate. Inputs are corrupted to snr_db (targets
/// stay perfect); `fused` routes through the sensor path.
std::vector<double> evaluate_rates(CsiModel &model, const std::vector<const sim::Sample *> &samples,
                                   const std::vector<int> &rates, bool fused, double snr_db = sim::kPerfectCsi,
                                   std::uint64_t seed = 0, std::size_t batch = 32);

/// Weighted multi-rate loss of one batch, with or without the sensor path.
double batch_loss(CsiModel &model, const std::vector<const sim::Sample *> &batch, const std::vector<int> &rates,
                  double gamma, bool fused);

/// Jointly trains encoder, quantizer and decoder on perfect (or cfg-corrupted) CSI.
TrainResult train_stage1(const sim::Dataset &data, const ModelConfig &model, const TrainConfig &cfg);

/// Adds a sensor extractor and refiner to a stage-1 model and trains only
/// those; stage-1 groups are frozen and carried over unchanged.
TrainResult train_stage2(const sim::Dataset &data, const Checkpoint &stage1, const TrainConfig &cfg,
                         std::optional<FusionConfig> fusion = std::nullopt);

} // namespace csiforge::train
