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

#include "csiforge/diffcore/tensor.hpp"

#include <algorithm>
#include <malloc.h>
#include <numeric>
#include <sstream>

namespace csiforge::diff
{

std::size_t numel(const Shape &shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape &shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace
{

// Tape tensors are allocated and freed every step; serving them from the
// heap instead of fresh mmap regions avoids repeated page faults.
[[maybe_unused]] const bool kHeapTuned = [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
}();

} // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill)
{
    for (auto d : shape_)
        if (d == 0)
            throw ShapeError("tensor", "zero-sized axis in " + to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    if (numel(shape_) != data_.size())
        throw ShapeError("tensor", "data length " + std::to_string(data_.size()) + " does not match shape " +
                                       to_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const
{
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
}

void Tensor::reshape(Shape shape)
{
    if (numel(shape) != data_.size())
        throw ShapeError("reshape", "cannot view " + to_string(shape_) + " as " + to_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Parameter::zero_grad()
{
    if (grad.shape() != value.shape())
        grad = Tensor(value.shape());
    else
        grad.fill(0.0);
}

} // namespace csiforge::diff
