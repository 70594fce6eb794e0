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
#include <cstdint>
#include <iosfwd>
#include <optional>

#include "linvid/autograd.hpp"
#include "linvid/flops.hpp"
#include "linvid/linear_attention.hpp"
#include "linvid/rope.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

/// How the kernel-3 temporal convolution is made causal across blocks.
enum class ConvCacheMode {
  /// Taps (t-2, t-1, t). Two trailing frames of the previous block are cached.
  kTwoFrameCausal,
  /// Taps (t-1, t, t+1) inside a block; the frame before the block comes from
  /// the cache and the frame after it is zero. One trailing frame is cached.
  kOneFrameBlockCentered,
};

/// Number of trailing frames a conv cache holds for `mode`.
std::size_t conv_cache_frames(ConvCacheMode mode);

/// Shared block geometry. Block i covers global tokens
/// [i * tokens_per_block(), (i + 1) * tokens_per_block()).
struct BlockLayout {
  std::size_t frames_per_block = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t tokens_per_frame() const { return height * width; }
  std::size_t tokens_per_block() const { return frames_per_block * height * width; }
};

/// Per-layer constant-size cache for block-autoregressive inference.
///
/// state_sum = sum_j RoPE(phi(K_j))^T V_j over all committed tokens,
/// key_sum   = sum_j phi(K_j) (un-rotated),
/// conv_cache holds the trailing frames of the last committed block as rows
/// [frames * H * W, model_dim], frame-major. Its byte size never depends on
/// tokens_seen.
struct LayerKVCache {
  Tensor state_sum;
  Tensor key_sum;
  std::optional<Tensor> conv_cache;
  std::size_t tokens_seen = 0;

  static LayerKVCache empty(std::size_t heads, std::size_t head_dim);

  std::size_t heads() const { return state_sum.dim(0); }
  std::size_t head_dim() const { return state_sum.dim(1); }
  /// tokens_seen == 0, zero sums and no conv cache.
  bool is_empty() const;
  AttentionPrefix prefix() const { return {state_sum, key_sum}; }
};

/// Exact payload bytes of state_sum + key_sum + conv_cache for the given
/// element size.
std::size_t cache_size_bytes(const LayerKVCache& cache, std::size_t element_size = sizeof(double));

/// The same quantity computed from shapes alone.
std::size_t cache_payload_bytes(std::size_t heads, std::size_t head_dim, std::size_t conv_rows,
                                std::size_t model_dim, std::size_t element_size);

/// Quadratic-time reference: O_i = sum_{j visible} (RoPE(phi(Q_i)).RoPE(phi(K_j))) V_j
/// / (sum_{j visible} phi(Q_i).phi(K_j) + eps), where j is visible from i when
/// j's block index <= i's block index. block_tokens = 1 is token-level
/// causality. Every pair is evaluated explicitly; no state is accumulated.
Tensor causal_linear_attention_direct(const Tensor& q, const Tensor& k, const Tensor& v, const TokenGrid& grid,
                                      const RopeConfig& cfg, double eps = kDefaultAttentionEps,
                                      std::size_t block_tokens = 1);

struct RecurrentResult {
  Tensor out;
  LayerKVCache cache;
};

/// Processes one block (Q, K, V: [tokens_per_block, heads, d]) against the
/// cached prefix. Attention is bidirectional inside the block; RoPE positions
/// are global (offset by cache.tokens_seen). The returned cache has the
/// block's contributions folded in; its conv_cache is passed through unchanged.
RecurrentResult causal_linear_attention_recurrent(const Tensor& q, const Tensor& k, const Tensor& v,
                                                  const LayerKVCache& cache, const BlockLayout& layout,
                                                  const TokenGrid& grid, const RopeConfig& cfg,
                                                  double eps = kDefaultAttentionEps, FlopCounter* flops = nullptr);

/// Block-causal temporal convolution over x[T, S, D] (kernel 3, weight
/// [3, D, D], bias [D]) for the given cache mode. Frames before x come from
/// `history` ([conv_cache_frames(mode) * S, D] rows) or are zero when it is
/// absent. In kOneFrameBlockCentered mode the right tap never crosses a block
/// boundary (blocks are `frames_per_block` long, aligned to the start of x).
Tensor block_causal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvCacheMode mode,
                         std::size_t frames_per_block, const Tensor* history = nullptr, FlopCounter* flops = nullptr);

struct CausalConvResult {
  Tensor out;
  Tensor cache;
};

/// One streaming step over a single block x[T_b, S, D]: consumes the cached
/// trailing frames of the previous block and returns the new cache.
CausalConvResult causal_temporal_conv(const Tensor& x, const std::optional<Tensor>& conv_cache,
                                      const Tensor& weight, const Tensor& bias,
                                      ConvCacheMode mode = ConvCacheMode::kTwoFrameCausal,
                                      FlopCounter* flops = nullptr);

/// Trailing cache rows after appending block x[T_b, S, D] to `previous`.
Tensor next_conv_cache(const Tensor& x, const std::optional<Tensor>& previous, ConvCacheMode mode);

/// Flat little-endian snapshot: five u64 header words (heads, d, conv rows,
/// model_dim, tokens_seen) followed by the raw doubles of state_sum, key_sum
/// and conv_cache in that order. Absent conv cache is written as 0 rows and
/// model_dim 0.
void save_cache(const LayerKVCache& cache, std::ostream& out);
LayerKVCache load_cache(std::istream& in);

namespace ag {
Var block_causal_conv(const Var& x, const Var& weight, const Var& bias, ConvCacheMode mode,
                      std::size_t frames_per_block, const Tensor* history = nullptr, FlopCounter* flops = nullptr);
}  // namespace ag

}  // namespace linvid
