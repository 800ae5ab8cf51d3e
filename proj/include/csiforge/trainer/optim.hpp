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

#include "csiforge/diffcore/tensor.hpp"

#include <string>
#include <vector>

namespace csiforge::train
{

/// Group of a parameter: its name up to the first '.'.
std::string group_of(const std::string &param_name);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. Parameters with requires_grad off are ignored.
double clip_grad_norm(const std::vector<diff::Parameter *> &params, double max_norm);

struct AdamConfig
{
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer over the parameters that require gradients.
class Adam
{
public:
    Adam(std::vector<diff::Parameter *> params, AdamConfig cfg = {});

    /// Applies one update from the current gradients. Throws TrainError naming
    /// the parameter group when a gradient is not finite; nothing is updated then.
    void step();

    std::size_t steps() const { return t_; }
    const AdamConfig &config() const { return cfg_; }

private:
    std::vector<diff::Parameter *> params_;
    std::vector<diff::Tensor> m_, v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

} // namespace csiforge::train
