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

#include "linvid/causal_state.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "linvid/ops.hpp"

namespace linvid {

std::size_t conv_cache_frames(ConvCacheMode mode) { return mode == ConvCacheMode::kTwoFrameCausal ? 2 : 1; }

LayerKVCache LayerKVCache::empty(std::size_t heads, std::size_t head_dim) {
  return {Tensor({heads, head_dim, head_dim}), Tensor({heads, head_dim}), std::nullopt, 0};
}

bool LayerKVCache::is_empty() const {
  auto zero = [](const Tensor& t) { return std::all_of(t.data().begin(), t.data().end(), [](double v) { return v == 0.0; }); };
  return tokens_seen == 0 && !conv_cache && zero(state_sum) && zero(key_sum);
}

std::size_t cache_payload_bytes(std::size_t heads, std::size_t head_dim, std::size_t conv_rows,
                                std::size_t model_dim, std::size_t element_size) {
  return (heads * head_dim * head_dim + heads * head_dim + conv_rows * model_dim) * element_size;
}

std::size_t cache_size_bytes(const LayerKVCache& cache, std::size_t element_size) {
  const std::size_t conv = cache.conv_cache ? cache.conv_cache->size() : 0;
  return (cache.state_sum.size() + cache.key_sum.size() + conv) * element_size;
}

Tensor causal_linear_attention_direct(const Tensor& q, const Tensor& k, const Tensor& v, const TokenGrid& grid,
                                      const RopeConfig& cfg, double eps, std::size_t block_tokens) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("causal_linear_attention_direct expects matching [N, heads, d]");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (block_tokens == 0) throw std::invalid_argument("block_tokens must be positive");
  const std::size_t n = q.dim(0), heads = q.dim(1), d = q.dim(2);
  const Tensor fq = relu(q);
  const Tensor fk = relu(k);
  const Tensor rq = rope_rotate(fq, grid, cfg);
  const Tensor rk = rope_rotate(fk, grid, cfg);
  Tensor out(q.shape());
  std::vector<double> num(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t visible_end = std::min(n, (i / block_tokens + 1) * block_tokens);
    for (std::size_t h = 0; h < heads; ++h) {
      std::fill(num.begin(), num.end(), 0.0);
      double den = 0.0;
      const std::size_t qi = (i * heads + h) * d;
      for (std::size_t j = 0; j < visible_end; ++j) {
        const std::size_t kj = (j * heads + h) * d;
        double score = 0.0, plain = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          score += rq[qi + a] * rk[kj + a];
          plain += fq[qi + a] * fk[kj + a];
        }
        for (std::size_t a = 0; a < d; ++a) num[a] += score * v[kj + a];
        den += plain;
      }
      for (std::size_t a = 0; a < d; ++a) out[qi + a] = num[a] / (den + eps);
    }
  }
  return out;
}

RecurrentResult causal_linear_attention_recurrent(const Tensor& q, const Tensor& k, const Tensor& v,
                                                  const LayerKVCache& cache, const BlockLayout& layout,
                                                  const TokenGrid& grid, const RopeConfig& cfg, double eps,
                                                  FlopCounter* flops) {
  if (q.rank() != 3 || q.dim(0) != layout.tokens_per_block()) {
    throw ShapeError("recurrent attention expects one block of " + std::to_string(layout.tokens_per_block()) +
                     " tokens, got " + shape_str(q.shape()));
  }
  if (grid.height != layout.height || grid.width != layout.width) {
    throw std::invalid_argument("token grid spatial extents do not match the block layout");
  }
  if (cache.tokens_seen % layout.tokens_per_block() != 0) {
    throw std::invalid_argument("cache has seen " + std::to_string(cache.tokens_seen) +
                                " tokens, not a whole number of blocks");
  }
  if (cache.state_sum.shape() != Shape{q.dim(1), q.dim(2), q.dim(2)}) {
    throw ShapeError("cache state " + shape_str(cache.state_sum.shape()) + " does not match block " +
                     shape_str(q.shape()));
  }
  const Tensor fq = relu(q);
  const Tensor fk = relu(k);
  const Tensor rq = rope_rotate(fq, grid, cfg, cache.tokens_seen);
  const Tensor rk = rope_rotate(fk, grid, cfg, cache.tokens_seen);
  // relu on q and k, then 6 FLOPs per rotated pair of each.
  count_flops(flops, 2 * q.size() + (cfg.enabled() ? 6 * q.size() : 0));
  const AttentionPrefix prefix = cache.prefix();
  BlockAttentionResult r = block_linear_attention(rq, rk, v, fq, fk, q.dim(0), eps, &prefix, flops);
  RecurrentResult result{std::move(r.out),
                         {std::move(r.totals.state_sum), std::move(r.totals.key_sum), cache.conv_cache,
                          cache.tokens_seen + q.dim(0)}};
  return result;
}

namespace {

struct ConvGeometry {
  std::size_t frames, spatial, d, lag;
  std::array<int, kTemporalKernel> taps;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvCacheMode mode,
                           std::size_t frames_per_block, const Tensor* history) {
  if (x.rank() != 3) throw ShapeError("temporal conv expects x[T, S, D], got " + shape_str(x.shape()));
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), conv_cache_frames(mode), {}};
  g.taps = mode == ConvCacheMode::kTwoFrameCausal ? std::array<int, 3>{-2, -1, 0} : std::array<int, 3>{-1, 0, 1};
  if (weight.shape() != Shape{kTemporalKernel, g.d, g.d} || bias.shape() != Shape{g.d}) {
    throw ShapeError("temporal conv weight must be [3, D, D] and bias [D] for D=" + std::to_string(g.d));
  }
  if (frames_per_block == 0) throw std::invalid_argument("frames_per_block must be positive");
  if (history && history->shape() != Shape{g.lag * g.spatial, g.d}) {
    throw ShapeError("conv cache " + shape_str(history->shape()) + " does not match expected [" +
                     std::to_string(g.lag * g.spatial) + "," + std::to_string(g.d) + "]");
  }
  return g;
}

// Source row for output frame t, tap k: pointer into x or history, or null
// when the tap reads zero padding.
const double* tap_source(const ConvGeometry& g, const Tensor& x, const Tensor* history, ConvCacheMode mode,
                         std::size_t frames_per_block, std::size_t t, std::size_t k, std::size_t s,
                         bool* from_x = nullptr, std::size_t* x_offset = nullptr) {
  const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + g.taps[k];
  if (src >= static_cast<std::ptrdiff_t>(g.frames)) return nullptr;
  if (mode == ConvCacheMode::kOneFrameBlockCentered && src >= 0) {
    const std::size_t block_end = (t / frames_per_block + 1) * frames_per_block;
    if (static_cast<std::size_t>(src) >= block_end) return nullptr;
  }
  if (src < 0) {
    if (!history) return nullptr;
    const std::size_t hf = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(g.lag) + src);
    if (from_x) *from_x = false;
    return history->data().data() + (hf * g.spatial + s) * g.d;
  }
  const std::size_t off = (static_cast<std::size_t>(src) * g.spatial + s) * g.d;
  if (from_x) *from_x = true;
  if (x_offset) *x_offset = off;
  return x.data().data() + off;
}

}  // namespace

Tensor block_causal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvCacheMode mode,
                         std::size_t frames_per_block, const Tensor* history, FlopCounter* flops) {
  const ConvGeometry g = conv_geometry(x, weight, bias, mode, frames_per_block, history);
  Tensor out(x.shape());
  for (std::size_t t = 0; t < g.frames; ++t) {
    for (std::size_t s = 0; s < g.spatial; ++s) {
      double* orow = out.data().data() + (t * g.spatial + s) * g.d;
      std::copy_n(bias.data().data(), g.d, orow);
      for (std::size_t k = 0; k < kTemporalKernel; ++k) {
        const double* src = tap_source(g, x, history, mode, frames_per_block, t, k, s);
        if (!src) continue;
        const double* w = weight.data().data() + k * g.d * g.d;
        for (std::size_t i = 0; i < g.d; ++i) {
          const double xv = src[i];
          for (std::size_t j = 0; j < g.d; ++j) orow[j] += xv * w[i * g.d + j];
        }
      }
    }
  }
  count_flops(flops, kFlopsPerMac * kTemporalKernel * g.frames * g.spatial * g.d * g.d);
  return out;
}

Tensor next_conv_cache(const Tensor& x, const std::optional<Tensor>& previous, ConvCacheMode mode) {
  if (x.rank() != 3) throw ShapeError("conv cache update expects x[T, S, D]");
  const std::size_t lag = conv_cache_frames(mode);
  const std::size_t spatial = x.dim(1), d = x.dim(2), frames = x.dim(0);
  const std::size_t frame_size = spatial * d;
  Tensor cache({lag * spatial, d});
  if (previous && previous->shape() != cache.shape()) {
    throw ShapeError("previous conv cache " + shape_str(previous->shape()) + " does not match " +
                     shape_str(cache.shape()));
  }
  // Trailing `lag` frames of concat(previous or zeros, x).
  for (std::size_t f = 0; f < lag; ++f) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(frames) - static_cast<std::ptrdiff_t>(lag) +
                               static_cast<std::ptrdiff_t>(f);
    double* dst = cache.data().data() + f * frame_size;
    if (src >= 0) {
      std::copy_n(x.data().data() + static_cast<std::size_t>(src) * frame_size, frame_size, dst);
    } else if (previous) {
      const std::size_t pf = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(lag) + src);
      std::copy_n(previous->data().data() + pf * frame_size, frame_size, dst);
    }
  }
  return cache;
}

CausalConvResult causal_temporal_conv(const Tensor& x, const std::optional<Tensor>& conv_cache,
                                      const Tensor& weight, const Tensor& bias, ConvCacheMode mode,
                                      FlopCounter* flops) {
  const std::size_t frames = x.rank() == 3 ? x.dim(0) : 0;
  Tensor out = block_causal_conv(x, weight, bias, mode, std::max<std::size_t>(frames, 1),
                                 conv_cache ? &*conv_cache : nullptr, flops);
  return {std::move(out), next_conv_cache(x, conv_cache, mode)};
}

using detail::get_doubles;
using detail::get_u64;
using detail::put_doubles;
using detail::put_u64;

void save_cache(const LayerKVCache& cache, std::ostream& out) {
  put_u64(out, cache.heads());
  put_u64(out, cache.head_dim());
  put_u64(out, cache.conv_cache ? cache.conv_cache->dim(0) : 0);
  put_u64(out, cache.conv_cache ? cache.conv_cache->dim(1) : 0);
  put_u64(out, cache.tokens_seen);
  put_doubles(out, cache.state_sum);
  put_doubles(out, cache.key_sum);
  if (cache.conv_cache) put_doubles(out, *cache.conv_cache);
  if (!out) throw std::runtime_error("failed to write cache snapshot");
}

LayerKVCache load_cache(std::istream& in) {
  const std::uint64_t heads = get_u64(in, "cache snapshot");
  const std::uint64_t d = get_u64(in, "cache snapshot");
  const std::uint64_t rows = get_u64(in, "cache snapshot");
  const std::uint64_t model_dim = get_u64(in, "cache snapshot");
  const std::uint64_t seen = get_u64(in, "cache snapshot");
  constexpr std::uint64_t kSane = 1ULL << 32;
  if (heads > kSane || d > kSane || rows > kSane || model_dim > kSane) {
    throw std::runtime_error("cache snapshot header is corrupt");
  }
  LayerKVCache cache = LayerKVCache::empty(heads, d);
  cache.tokens_seen = seen;
  get_doubles(in, cache.state_sum, "cache snapshot");
  get_doubles(in, cache.key_sum, "cache snapshot");
  if (rows > 0 || model_dim > 0) {
    Tensor conv({rows, model_dim});
    get_doubles(in, conv, "cache snapshot");
    cache.conv_cache = std::move(conv);
  }
  return cache;
}

namespace ag {

Var block_causal_conv(const Var& x, const Var& weight, const Var& bias, ConvCacheMode mode,
                      std::size_t frames_per_block, const Tensor* history, FlopCounter* flops) {
  Tensor out = linvid::block_causal_conv(x.value(), weight.value(), bias.value(), mode, frames_per_block, history, flops);
  std::shared_ptr<const Tensor> hist = history ? std::make_shared<const Tensor>(*history) : nullptr;
  return Tape::record(std::move(out), {x, weight, bias},
                      [x, weight, bias, mode, frames_per_block, hist](const Tensor& gout, const std::vector<bool>&) {
                        const Tensor& xv = x.value();
                        const Tensor& wv = weight.value();
                        const ConvGeometry g = conv_geometry(xv, wv, bias.value(), mode, frames_per_block, hist.get());
                        Tensor dx(xv.shape()), dw(wv.shape()), db({g.d});
                        for (std::size_t t = 0; t < g.frames; ++t) {
                          for (std::size_t s = 0; s < g.spatial; ++s) {
                            const double* grow = gout.data().data() + (t * g.spatial + s) * g.d;
                            for (std::size_t j = 0; j < g.d; ++j) db[j] += grow[j];
                            for (std::size_t k = 0; k < kTemporalKernel; ++k) {
                              bool from_x = false;
                              std::size_t xo = 0;
                              const double* src =
                                  tap_source(g, xv, hist.get(), mode, frames_per_block, t, k, s, &from_x, &xo);
                              if (!src) continue;
                              for (std::size_t i = 0; i < g.d; ++i) {
                                const double* w = wv.data().data() + k * g.d * g.d + i * g.d;
                                double* dwr = dw.data().data() + k * g.d * g.d + i * g.d;
                                double acc = 0.0;
                                for (std::size_t j = 0; j < g.d; ++j) {
                                  acc += w[j] * grow[j];
                                  dwr[j] += src[i] * grow[j];
                                }
                                if (from_x) dx[xo + i] += acc;
                              }
                            }
                          }
                        }
                        return std::vector<Tensor>{std::move(dx), std::move(dw), std::move(db)};
                      });
}

}  // namespace ag

}  // namespace linvid
