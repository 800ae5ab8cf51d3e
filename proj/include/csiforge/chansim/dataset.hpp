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
#include "csiforge/common/binary_io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace csiforge::sim
{

enum class Modality : std::uint8_t
{
    uplink_csi = 0,
    image_grid = 1
};

/// Real-valued C x rows x cols sensor grid, row-major within each channel.
struct SensorGrid
{
    Modality modality = Modality::uplink_csi;
    std::size_t channels = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t patch_h = 1;
    std::size_t patch_w = 1;
    std::vector<float> values;

    float at(std::size_t c, std::size_t r, std::size_t k) const { return values[(c * rows + r) * cols + k]; }
    void validate() const;

    bool operator==(const SensorGrid &) const = default;
};

/// Real/imaginary planes of an uplink estimate as a 2 x N_t x N_s grid.
SensorGrid uplink_sensor_grid(const ChannelMatrix &h, std::size_t patch_h, std::size_t patch_w);

struct Sample
{
    ChannelMatrix downlink;
    std::optional<ChannelMatrix> uplink;
    std::optional<SensorGrid> sensor;
    RaySet rays;
};

struct Dataset
{
    SimConfig config;
    std::vector<Sample> samples;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const std::string &path, const Dataset &data);
Dataset read_dataset(const std::string &path);

void serialize_dataset(BinaryWriter &w, const Dataset &data);
Dataset deserialize_dataset(BinaryReader &r);

void write_sensor_grid(BinaryWriter &w, const SensorGrid &g);
SensorGrid read_sensor_grid(BinaryReader &r);

struct GenOptions
{
    std::size_t count = 0;
    std::uint64_t seed = 0;
    double los_probability = 0.5;
    bool with_uplink = false;
    /// Uplink estimation SNR, dB; kPerfectCsi stores the clean channel.
    double uplink_snr_db = 10.0;
};

/// Deterministic sample generation; channels are rounded to f32 so a
/// written dataset reads back identical to the generated one.
Dataset generate_dataset(const SimConfig &cfg, const GenOptions &opt);

} // namespace csiforge::sim
