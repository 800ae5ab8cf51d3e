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

#include "csiforge/trainer/optim.hpp"
#include "csiforge/trainer/loss.hpp"

#include <cmath>

namespace csiforge::train
{

std::string group_of(const std::string &param_name) { return param_name.substr(0, param_name.find('.')); }

double clip_grad_norm(const std::vector<diff::Parameter *> &params, double max_norm)
{
    double sq = 0.0;
    for (auto *p : params)
        if (p->requires_grad)
            for (double g : p->grad.data())
                sq += g * g;
    const double norm = std::sqrt(sq);
    if (std::isfinite(norm) && norm > max_norm)
    {
        const double s = max_norm / norm;
        for (auto *p : params)
            if (p->requires_grad)
                for (auto &g : p->grad.storage())
                    g *= s;
    }
    return norm;
}

Adam::Adam(std::vector<diff::Parameter *> params, AdamConfig cfg) : cfg_(cfg)
{
    if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
        !(cfg.eps > 0.0))
        throw TrainError("Adam: invalid hyper-parameters");
    for (auto *p : params)
        if (p->requires_grad)
        {
            params_.push_back(p);
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
}

void Adam::step()
{
    for (auto *p : params_)
    {
        if (p->grad.size() != p->value.size())
            throw TrainError("Adam: gradient shape mismatch for '" + p->name + "'");
        for (double g : p->grad.data())
            if (!std::isfinite(g))
                throw TrainError("non-finite gradient in parameter group '" + group_of(p->name) + "' (" + p->name +
                                 ")");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i)
    {
        double *w = params_[i]->value.ptr();
        const double *g = params_[i]->grad.ptr();
        double *m = m_[i].ptr();
        double *v = v_[i].ptr();
        for (std::size_t k = 0, n = m_[i].size(); k < n; ++k)
        {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            w[k] -= cfg_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
        }
    }
}

} // namespace csiforge::train
