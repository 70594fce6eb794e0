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

#include "linvid/autograd.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

/// 3D rotary embedding layout. The head dimension is split into contiguous
/// (time, height, width) sub-blocks; each sub-block is rotated pairwise,
/// interleaved ((0,1), (2,3), ...), by its own coordinate.
///
/// A config with all three axis dims zero disables the rotation entirely.
/// Otherwise every axis dim must be even and they must sum to head_dim.
struct RopeConfig {
  std::size_t dim_t = 4;
  std::size_t dim_h = 6;
  std::size_t dim_w = 6;
  double base = 10000.0;

  static RopeConfig disabled() { return {0, 0, 0, 10000.0}; }
  /// One axis only, for sequences laid out on a (N, 1, 1) grid.
  static RopeConfig temporal_only(std::size_t head_dim) { return {head_dim, 0, 0, 10000.0}; }

  bool enabled() const { return dim_t + dim_h + dim_w > 0; }
  /// Throws std::invalid_argument on an odd axis dim or a sum != head_dim.
  void validate(std::size_t head_dim) const;
};

/// Token index <-> (frame, row, col), frame-major then row-major.
struct TokenGrid {
  std::size_t frames = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t tokens() const { return frames * height * width; }
  std::size_t tokens_per_frame() const { return height * width; }
  std::array<std::size_t, 3> coords(std::size_t token) const;
  std::size_t index(std::size_t t, std::size_t h, std::size_t w) const { return (t * height + h) * width + w; }
  /// |dt| + |dh| + |dw| between two token indices.
  std::size_t manhattan(std::size_t a, std::size_t b) const;
};

/// Rotates x[N, heads, head_dim]. Row n sits at grid token `token_offset + n`;
/// throws std::out_of_range when that falls outside the grid.
Tensor rope_rotate(const Tensor& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset = 0);

/// Inverse rotation (transpose of rope_rotate).
Tensor rope_unrotate(const Tensor& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset = 0);

namespace ag {
Var rope_rotate(const Var& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset = 0);
}  // namespace ag

}  // namespace linvid
