// Copyright 2026 The linvid Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace linvid {

using Shape = std::vector<std::size_t>;

/// Thrown whenever operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. The universal value type.
///
/// Invariant: shape_numel(shape()) == size(). A rank-0 tensor (empty shape)
/// holds exactly one element.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({}, {value}); }
  static Tensor from(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Same buffer, new shape. Element count must match.
  Tensor reshape(Shape shape) const&;
  Tensor reshape(Shape shape) &&;

  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

/// Bitwise equality of shape and every element.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// max_i |a_i - b_i|.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// max|a - b| / max|b|, the normwise relative error used by the oracle checks.
/// Returns the absolute difference when b is identically zero.
double max_rel_err(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

}  // namespace linvid
