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

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "linvid/flops.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

class Tape;

/// A tensor value that may be tracked on a Tape.
///
/// Untracked Vars (constants) flow through the taped ops as plain arithmetic,
/// so the same model code serves inference and training. The value is shared
/// and immutable; copying a Var is cheap.
class Var {
 public:
  Var() = default;
  static Var constant(Tensor value);

  const Tensor& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Gradients produced by Tape::backward, indexed by node.
class Gradients {
 public:
  /// Gradient of the output w.r.t. `v`; zeros when v did not influence it.
  Tensor of(const Var& v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

/// Reverse-mode recording of taped operations. Confined to one thread.
class Tape {
 public:
  /// Receives the output gradient and which parents need a gradient; returns
  /// one tensor per parent (entries for parents that do not need one are
  /// ignored and may be left default-constructed).
  using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad, const std::vector<bool>& needs)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable input.
  Var leaf(Tensor value);

  /// Records an op. Returns an untracked Var when no parent is tracked.
  static Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  /// Backward pass from a single-element output.
  Gradients backward(const Var& output) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<int> parents;  // -1 for untracked parents
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Taped counterparts of the plain ops. Shape contracts match ops.hpp.
namespace ag {

Var matmul(const Var& a, const Var& b, FlopCounter* flops = nullptr);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& x);
Var silu(const Var& x);
/// gamma/beta may be default-constructed Vars for no affine transform.
Var layer_norm(const Var& x, const Var* gamma, const Var* beta, double eps = 1e-6);
Var softmax(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
/// mean((a - b)^2) as a scalar.
Var mse(const Var& a, const Var& b);
Var reshape(const Var& x, Shape shape);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(const Var& a, const Var& b);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var repeat_rows(const Var& x, std::size_t times);
Var conv1d_temporal(const Var& x, const Var& weight, const Var& bias, FlopCounter* flops = nullptr);

/// Multi-head softmax attention of q[N, H*d] over k, v[M, H*d], heads split on
/// the last axis, scores scaled by `scale`.
Var multihead_softmax_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, double scale,
                                FlopCounter* flops = nullptr);

/// x * W + b for x[N, in], W[in, out], b[out].
Var linear(const Var& x, const Var& weight, const Var& bias, FlopCounter* flops = nullptr);

}  // namespace ag

}  // namespace linvid
