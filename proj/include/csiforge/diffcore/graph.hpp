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

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace csiforge::diff
{

class Graph;

/// Handle to a value recorded on a Graph.
class Var
{
public:
    Var() = default;
    Var(Graph *graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph &graph() const { return *graph_; }
    std::size_t id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

    const Tensor &value() const;
    const Shape &shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }

private:
    Graph *graph_ = nullptr;
    std::size_t id_ = 0;
};

/// Receives the output gradient and writes into the input gradients.
/// Entries of `inputs` are null for inputs that do not need a gradient.
using BackwardFn = std::function<void(const Tensor &grad_out, std::vector<Tensor *> &grad_in)>;

/// Tape of primitive operations recorded in execution order.
///
/// Each call to a primitive appends one node; backward() walks the tape in
/// reverse, so the recording order is already a topological order. With
/// recording disabled the tape keeps only values, which is what inference uses.
class Graph
{
public:
    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;

    bool recording() const { return record_; }

    /// Constant leaf; never receives a gradient.
    Var constant(Tensor value);
    /// Leaf bound to a parameter; backward() accumulates into param.grad.
    Var param(Parameter &p);

    /// Appends an operation node. `fn` may be empty for non-differentiable outputs.
    Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn fn);

    const Tensor &value(std::size_t id) const { return nodes_[id].value; }
    const std::string &op_name(std::size_t id) const { return nodes_[id].op; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse pass from a single-element loss.
    void backward(const Var &loss);

    /// Gradient of a node after backward(); empty tensor if none reached it.
    const Tensor &grad(const Var &v) const { return nodes_[v.id()].grad; }

private:
    struct Node
    {
        std::string op;
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter *param = nullptr;
        bool needs_grad = false;
    };

    bool record_;
    std::deque<Node> nodes_; // stable addresses while the tape grows
};

inline const Tensor &Var::value() const { return graph_->value(id_); }

} // namespace csiforge::diff
