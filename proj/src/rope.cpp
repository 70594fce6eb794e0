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

#include "linvid/rope.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace linvid {

void RopeConfig::validate(std::size_t head_dim) const {
  if (!enabled()) return;
  if (dim_t % 2 || dim_h % 2 || dim_w % 2) {
    throw std::invalid_argument("rope axis dims must be even, got (" + std::to_string(dim_t) + "," +
                                std::to_string(dim_h) + "," + std::to_string(dim_w) + ")");
  }
  if (dim_t + dim_h + dim_w != head_dim) {
    throw std::invalid_argument("rope axis dims sum to " + std::to_string(dim_t + dim_h + dim_w) +
                                " but head_dim is " + std::to_string(head_dim));
  }
  if (!(base > 0.0)) throw std::invalid_argument("rope base frequency must be positive");
}

std::array<std::size_t, 3> TokenGrid::coords(std::size_t token) const {
  if (token >= tokens()) throw std::out_of_range("token " + std::to_string(token) + " outside grid");
  return {token / (height * width), (token / width) % height, token % width};
}

std::size_t TokenGrid::manhattan(std::size_t a, std::size_t b) const {
  const auto ca = coords(a);
  const auto cb = coords(b);
  std::size_t d = 0;
  for (int i = 0; i < 3; ++i) d += ca[i] > cb[i] ? ca[i] - cb[i] : cb[i] - ca[i];
  return d;
}

namespace {

Tensor rotate(const Tensor& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t offset, double sign) {
  if (x.rank() != 3) throw ShapeError("rope expects x[N, heads, head_dim], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), heads = x.dim(1), d = x.dim(2);
  cfg.validate(d);
  if (!cfg.enabled()) return x;
  if (n > 0 && offset + n > grid.tokens()) {
    throw std::out_of_range("rope positions [" + std::to_string(offset) + "," + std::to_string(offset + n) +
                            ") exceed grid of " + std::to_string(grid.tokens()) + " tokens");
  }
  const std::array<std::size_t, 3> axis_dims{cfg.dim_t, cfg.dim_h, cfg.dim_w};
  // Per-pair inverse frequencies, in head-dim order.
  std::vector<double> inv_freq;
  std::vector<int> pair_axis;
  for (int a = 0; a < 3; ++a) {
    for (std::size_t k = 0; k < axis_dims[a] / 2; ++k) {
      inv_freq.push_back(std::pow(cfg.base, -2.0 * static_cast<double>(k) / static_cast<double>(axis_dims[a])));
      pair_axis.push_back(a);
    }
  }
  Tensor out(x.shape());
  std::vector<double> cs(inv_freq.size()), sn(inv_freq.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = grid.coords(offset + i);
    for (std::size_t p = 0; p < inv_freq.size(); ++p) {
      const double angle = static_cast<double>(pos[pair_axis[p]]) * inv_freq[p];
      cs[p] = std::cos(angle);
      sn[p] = sign * std::sin(angle);
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const double* src = x.data().data() + (i * heads + h) * d;
      double* dst = out.data().data() + (i * heads + h) * d;
      for (std::size_t p = 0; p < inv_freq.size(); ++p) {
        const double a = src[2 * p];
        const double b = src[2 * p + 1];
        dst[2 * p] = a * cs[p] - b * sn[p];
        dst[2 * p + 1] = a * sn[p] + b * cs[p];
      }
    }
  }
  return out;
}

}  // namespace

Tensor rope_rotate(const Tensor& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset) {
  return rotate(x, grid, cfg, token_offset, 1.0);
}

Tensor rope_unrotate(const Tensor& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset) {
  return rotate(x, grid, cfg, token_offset, -1.0);
}

namespace ag {

Var rope_rotate(const Var& x, const TokenGrid& grid, const RopeConfig& cfg, std::size_t token_offset) {
  return Tape::record(linvid::rope_rotate(x.value(), grid, cfg, token_offset), {x},
                      [grid, cfg, token_offset](const Tensor& g, const std::vector<bool>&) {
                        return std::vector<Tensor>{rope_unrotate(g, grid, cfg, token_offset)};
                      });
}

}  // namespace ag

}  // namespace linvid
