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

#include "csiforge/common/binary_io.hpp"
#include "csiforge/trainer/model.hpp"

#include "json.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace csiforge::train
{

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord
{
    std::string name;
    diff::Shape shape;
    std::vector<float> data;

    bool operator==(const TensorRecord &) const = default;
};

struct GroupRecord
{
    std::string name;
    bool frozen = false;
    std::vector<TensorRecord> tensors;

    /// FNV-1a over tensor names, shapes and f32 payload bytes.
    std::uint64_t hash() const;
    bool operator==(const GroupRecord &) const = default;
};

/// Parameters by group plus a JSON blob {"model": ..., "training": ...}.
struct Checkpoint
{
    nlohmann::json config;
    std::vector<GroupRecord> groups;

    const GroupRecord *group(const std::string &name) const;
    ModelConfig model_config() const { return ModelConfig::from_json(config.at("model")); }
    bool operator==(const Checkpoint &o) const { return config == o.config && groups == o.groups; }
};

/// Snapshot of a model (values rounded to f32). Groups without parameters are omitted.
Checkpoint capture(const CsiModel &model, const std::set<std::string> &frozen, nlohmann::json training = {});

/// Copies checkpoint values into the model. Every checkpoint tensor must exist
/// in the model with the same shape; with `allow_missing` the model may hold
/// groups the checkpoint lacks (stage-1 weights into a fused model).
void restore(CsiModel &model, const Checkpoint &ckpt, bool allow_missing = false);

/// Model built from the checkpoint's config and values.
std::unique_ptr<CsiModel> load_model(const Checkpoint &ckpt);

void serialize_checkpoint(BinaryWriter &w, const Checkpoint &ckpt);
Checkpoint deserialize_checkpoint(BinaryReader &r);

/// File: "CSFKPT", u32 version, u32 group count, groups, JSON config string.
void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::string &path);

} // namespace csiforge::train
