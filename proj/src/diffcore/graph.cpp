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

#include "csiforge/diffcore/graph.hpp"

namespace csiforge::diff
{

Var Graph::constant(Tensor value)
{
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter &p)
{
    Node n;
    n.op = "param:" + p.name;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = record_ && p.requires_grad;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn fn)
{
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    if (record_)
    {
        for (const auto &in : inputs)
        {
            if (&in.graph() != this)
                throw std::logic_error(n.op + ": input belongs to a different graph");
            n.inputs.push_back(in.id());
            n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
        }
        if (n.needs_grad)
            n.backward = std::move(fn);
        n.needs_grad = n.needs_grad && static_cast<bool>(n.backward);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

void Graph::backward(const Var &loss)
{
    if (&loss.graph() != this)
        throw std::logic_error("backward: loss belongs to a different graph");
    if (!record_)
        throw std::logic_error("backward: graph was built without recording");
    Node &root = nodes_[loss.id()];
    if (root.value.size() != 1)
        throw ShapeError("backward", "loss must be scalar, got " + to_string(root.value.shape()));
    if (!root.needs_grad)
        return;

    for (auto &n : nodes_)
        n.grad = Tensor();
    root.grad = Tensor(root.value.shape(), 1.0);

    std::vector<Tensor *> grad_in;
    for (std::size_t i = loss.id() + 1; i-- > 0;)
    {
        Node &n = nodes_[i];
        if (!n.needs_grad || n.grad.empty())
            continue;
        if (n.param)
        {
            auto &pg = n.param->grad;
            if (pg.shape() != n.value.shape())
                pg = Tensor(n.value.shape());
            for (std::size_t k = 0; k < pg.size(); ++k)
                pg[k] += n.grad[k];
            continue;
        }
        grad_in.assign(n.inputs.size(), nullptr);
        for (std::size_t k = 0; k < n.inputs.size(); ++k)
        {
            Node &in = nodes_[n.inputs[k]];
            if (!in.needs_grad)
                continue;
            if (in.grad.empty())
                in.grad = Tensor(in.value.shape());
            grad_in[k] = &in.grad;
        }
        n.backward(n.grad, grad_in);
        // Intermediate gradients are not needed once propagated.
        if (i != loss.id())
            n.grad = Tensor();
    }
}

} // namespace csiforge::diff
