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
#include <vector>

#include "linvid/flops.hpp"

namespace linvid::bench {

/// Token-major [N, heads, d] buffer.
template <class T>
struct Seq {
  std::size_t n = 0, heads = 0, d = 0;
  std::vector<T> data;

  Seq() = default;
  Seq(std::size_t n_, std::size_t h_, std::size_t d_) : n(n_), heads(h_), d(d_), data(n_ * h_ * d_) {}
  T* row(std::size_t i, std::size_t h) { return data.data() + (i * heads + h) * d; }
  const T* row(std::size_t i, std::size_t h) const { return data.data() + (i * heads + h) * d; }
};

/// Growing cache of every past key and value.
template <class T>
struct FullKVCache {
  std::size_t heads = 0, d = 0;
  std::vector<T> keys, values;  // [tokens, heads, d]

  std::size_t tokens() const { return d && heads ? keys.size() / (heads * d) : 0; }
  std::size_t bytes() const { return (keys.size() + values.size()) * sizeof(T); }
};

/// Causal softmax attention of a chunk of new tokens over the cached prefix
/// and the chunk itself (token-level causal). The cache grows by the chunk.
template <class T>
Seq<T> causal_full_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, FullKVCache<T>& cache,
                             FlopCounter* flops = nullptr);

/// Ring buffer of the last `window` keys and values.
template <class T>
struct LocalKVCache {
  std::size_t heads = 0, d = 0, window = 0;
  std::size_t filled = 0, head = 0;  // entries held, next write slot
  std::vector<T> keys, values;       // [window, heads, d]

  LocalKVCache(std::size_t heads, std::size_t d, std::size_t window);
  std::size_t bytes() const { return 2 * filled * heads * d * sizeof(T); }
};

/// Causal softmax attention restricted to the most recent `window` tokens
/// (the current one included). Throws std::invalid_argument for window 0.
template <class T>
Seq<T> causal_local_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, LocalKVCache<T>& cache,
                              FlopCounter* flops = nullptr);

/// Running state of token-causal ReLU linear attention.
template <class T>
struct LinearState {
  std::size_t heads = 0, d = 0;
  std::vector<T> state;    // [heads, d, d]
  std::vector<T> key_sum;  // [heads, d]

  LinearState(std::size_t heads, std::size_t d);
  std::size_t bytes() const { return (state.size() + key_sum.size()) * sizeof(T); }
};

/// Token-causal ReLU linear attention (no positional rotation) streamed
/// through a constant-size state.
template <class T>
Seq<T> causal_linear_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, LinearState<T>& state, T eps,
                               FlopCounter* flops = nullptr);

}  // namespace linvid::bench
