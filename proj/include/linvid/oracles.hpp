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

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "linvid/rng.hpp"
#include "linvid/tensor.hpp"

/// Slow, direct reference computations. Nothing here calls into the kernels
/// it is used to check; shared pieces are limited to Tensor and Rng.
namespace linvid::oracle {

using Coord = std::array<std::size_t, 3>;  // (t, h, w)

/// Frame-major, then row-major token coordinates of a T x H x W grid,
/// starting at token `offset`.
std::vector<Coord> grid_coords(std::size_t frames, std::size_t height, std::size_t width, std::size_t count,
                               std::size_t offset = 0);

/// Triple-loop matmul of a[m, k] and b[k, n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Rotates each (2p, 2p+1) pair of x[N, heads, d] by coordinate * base^(-2p'/dim)
/// where p' indexes pairs inside the axis segment. dims = (t, h, w) segment sizes.
Tensor rope(const Tensor& x, const std::vector<Coord>& coords, const std::array<std::size_t, 3>& dims, double base);

/// Quadratic ReLU linear attention with rotation after the ReLU and a
/// rotation-free denominator. Key j is visible from query i when
/// j / block_tokens <= i / block_tokens; block_tokens >= N is bidirectional.
Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, const std::vector<Coord>& coords,
                        const std::array<std::size_t, 3>& dims, double base, double eps, std::size_t block_tokens);

/// Two-pass softmax attention on [N, heads, d]; mask(i, j) selects keys.
Tensor masked_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                                const std::function<bool(std::size_t, std::size_t)>& mask);

/// Kernel-3 temporal conv on x[T, S, D] with weight[3, D, D] and bias[D];
/// tap k reads frame t + offsets[k]. Frames outside [0, T) read zero, and so
/// does a positive offset that leaves t's block when block_frames > 0.
Tensor temporal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, const std::array<int, 3>& offsets,
                     std::size_t block_frames = 0);

/// Least-squares fit of v on x_t from Monte-Carlo draws of x0 ~ N(mean,
/// variance), eps ~ N(0, 1); returns the fitted E[v | x_t = x].
double regressed_velocity(double x, double t, double mean, double variance, std::size_t samples, Rng& rng);

/// One block of block-autoregressive sampling with a velocity model that
/// always returns zero, written out step by step.
Tensor zero_model_block(std::uint64_t seed, std::size_t block, const Shape& shape, const std::vector<double>& t);

}  // namespace linvid::oracle
