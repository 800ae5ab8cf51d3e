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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csiforge::diff
{

using Shape = std::vector<std::size_t>;

/// Row index map for gather_rows; -1 selects a zero row.
using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

std::size_t numel(const Shape &shape);
std::string to_string(const Shape &shape);

/// Error raised by a primitive whose operands do not fit together.
class ShapeError : public std::invalid_argument
{
public:
    ShapeError(const std::string &op, const std::string &what)
        : std::invalid_argument(op + ": " + what), op_(op) {}

    const std::string &op() const { return op_; }

private:
    std::string op_;
};

/// Dense row-major tensor of doubles.
class Tensor
{
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    const Shape &shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double *ptr() { return data_.data(); }
    const double *ptr() const { return data_.data(); }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double> &storage() { return data_; }
    const std::vector<double> &storage() const { return data_; }

    double &operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    void reshape(Shape shape);
    void fill(double v);

    bool operator==(const Tensor &other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Trainable tensor with its accumulated gradient.
struct Parameter
{
    std::string name;
    Tensor value;
    Tensor grad;
    bool requires_grad = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad();
};

} // namespace csiforge::diff
