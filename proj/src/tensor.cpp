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

#include "linvid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace linvid {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                     " elements");
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank mismatch for shape " + shape_str(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw std::out_of_range("tensor index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshape(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshape(std::move(shape));
}

Tensor Tensor::reshape(Shape shape) && {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
  const double diff = max_abs_diff(a, b);
  double scale = 0.0;
  for (double v : b.data()) scale = std::max(scale, std::abs(v));
  return scale > 0.0 ? diff / scale : diff;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace linvid
