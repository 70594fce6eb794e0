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

#include "linvid/autograd.hpp"
#include "linvid/flops.hpp"
#include "linvid/rope.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

inline constexpr double kDefaultAttentionEps = 1e-6;

/// Which features enter the denominator of ReLU linear attention.
enum class DenominatorMode {
  /// phi(Q) . sum phi(K): never negative, the stable form.
  kRopeFree,
  /// RoPE(phi(Q)) . sum RoPE(phi(K)): can go nonpositive. Diagnostics only.
  kRotated,
};

/// Accumulated prefix for block_linear_attention: sum over earlier tokens of
/// num_k^T v ([heads, d, d]) and of den_k ([heads, d]).
struct AttentionPrefix {
  Tensor state_sum;
  Tensor key_sum;

  static AttentionPrefix zeros(std::size_t heads, std::size_t d) {
    return {Tensor({heads, d, d}), Tensor({heads, d})};
  }
};

struct BlockAttentionResult {
  Tensor out;           // [N, heads, d]
  Tensor denominators;  // [N, heads], eps included
  AttentionPrefix totals;  // prefix plus every token of the input
};

/// The state-based kernel shared by every linear attention path.
///
/// Inputs are [N, heads, d]. Tokens are split into consecutive segments of
/// `block_tokens`; a token in segment b sees the prefix plus all tokens of
/// segments 0..b (full attention inside its own segment):
///
///   out_i = num_q_i . S_b / (den_q_i . z_b + eps)
///   S_b   = prefix.state_sum + sum_{j in segments <= b} num_k_j^T v_j
///   z_b   = prefix.key_sum   + sum_{j in segments <= b} den_k_j
///
/// block_tokens == N gives plain bidirectional attention, 1 gives token-level
/// causal attention. States accumulate block-sequentially in ascending token
/// order, so streaming the same tokens through a prefix reproduces a
/// one-shot call bit for bit. No N x N matrix is formed.
BlockAttentionResult block_linear_attention(const Tensor& num_q, const Tensor& num_k, const Tensor& v,
                                            const Tensor& den_q, const Tensor& den_k, std::size_t block_tokens,
                                            double eps, const AttentionPrefix* prefix = nullptr,
                                            FlopCounter* flops = nullptr);

/// Non-causal ReLU linear attention with RoPE applied after the ReLU and a
/// RoPE-free denominator (unless `mode` says otherwise).
Tensor linear_attention_forward(const Tensor& q, const Tensor& k, const Tensor& v, const TokenGrid& grid,
                                const RopeConfig& cfg, double eps = kDefaultAttentionEps,
                                DenominatorMode mode = DenominatorMode::kRopeFree);

/// Per-(token, head) denominators of linear_attention_forward, eps included.
Tensor linear_attention_denominators(const Tensor& q, const Tensor& k, const TokenGrid& grid, const RopeConfig& cfg,
                                     double eps = kDefaultAttentionEps,
                                     DenominatorMode mode = DenominatorMode::kRopeFree);

/// A[h, i, j] = RoPE(phi(Q_i)) . RoPE(phi(K_j)) / (phi(Q_i) . sum phi(K) + eps),
/// so that A[h] * V[:, h, :] reproduces linear_attention_forward.
Tensor effective_attention_map(const Tensor& q, const Tensor& k, const TokenGrid& grid, const RopeConfig& cfg,
                               double eps = kDefaultAttentionEps);

/// Mean over rows of the |A|-weighted grid Manhattan distance. All-zero rows
/// are skipped; throws std::invalid_argument if every row is zero.
double locality_metric(const Tensor& attention, const TokenGrid& grid);

/// softmax(Q K^T * scale) V per head on [N, heads, d], materialised.
Tensor softmax_attention_reference(const Tensor& q, const Tensor& k, const Tensor& v, double scale);

namespace ag {

/// Taped block_linear_attention; the prefix is treated as a constant. When
/// `totals` is given it receives the accumulated state after the last token.
Var block_linear_attention(const Var& num_q, const Var& num_k, const Var& v, const Var& den_q, const Var& den_k,
                           std::size_t block_tokens, double eps, const AttentionPrefix* prefix = nullptr,
                           FlopCounter* flops = nullptr, AttentionPrefix* totals = nullptr);

}  // namespace ag

}  // namespace linvid
