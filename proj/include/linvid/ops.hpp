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

#include "linvid/flops.hpp"
#include "linvid/tensor.hpp"

// Plain (untaped) tensor arithmetic. Every function is a pure function of its
// inputs and checks shapes.
//
// Broadcast rule: add() and mul() accept a right operand whose shape equals the
// trailing axes of the left operand's shape (e.g. a bias [D] against [N, D]).
// The right operand is repeated over the leading axes. No other broadcasting
// exists anywhere in the library.

namespace linvid {

/// [.., m, k] x [.., k, n] -> [.., m, n]. Leading (batch) axes must agree, or b
/// may be 2-D and shared across the batch.
Tensor matmul(const Tensor& a, const Tensor& b, FlopCounter* flops = nullptr);

/// Swaps the last two axes.
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// Adds `alpha * x` into `acc` in place.
void axpy(double alpha, const Tensor& x, Tensor& acc);

Tensor relu(const Tensor& x);
/// SiLU, x * sigmoid(x). The FFN nonlinearity.
Tensor silu(const Tensor& x);
double sigmoid(double x);

/// Per-row normalisation over the last axis. gamma/beta are [D], or null for
/// no affine transform.
Tensor layer_norm(const Tensor& x, const Tensor* gamma, const Tensor* beta, double eps = 1e-6);

/// Max-subtracted softmax over the last axis.
Tensor softmax(const Tensor& x);

double sum(const Tensor& x);
double mean(const Tensor& x);

/// Rows [begin, end) along axis 0.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const Tensor& a, const Tensor& b);
/// Columns [begin, end) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// Repeats each row of a 2-D tensor `times` times consecutively.
Tensor repeat_rows(const Tensor& x, std::size_t times);

/// Temporal convolution along axis 0 of x[T, S, D] with kernel 3, shared over
/// the S spatial positions. Taps (t-1, t, t+1) use weight[0..2] ([3, D, D],
/// row-vector convention out = x * W) and the sequence is zero-padded by one
/// frame on both sides.
Tensor conv1d_temporal(const Tensor& x, const Tensor& weight, const Tensor& bias, FlopCounter* flops = nullptr);

inline constexpr std::size_t kTemporalKernel = 3;

}  // namespace linvid
