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

#include "linvid/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace linvid::bench {

namespace {

template <class T>
void check(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, std::size_t heads, std::size_t d) {
  if (q.n != k.n || q.n != v.n || q.heads != heads || k.heads != heads || v.heads != heads || q.d != d || k.d != d ||
      v.d != d) {
    throw std::invalid_argument("baseline inputs do not match the cache geometry");
  }
}

// Softmax over the given key rows for one query; writes d outputs.
template <class T, class KeyAt>
void softmax_row(const T* qi, std::size_t count, KeyAt key_at, std::size_t d, T scale, std::vector<T>& scores, T* out,
                 FlopCounter* flops) {
  scores.resize(count);
  T mx = -INFINITY;
  for (std::size_t j = 0; j < count; ++j) {
    const T* kj = key_at(j).first;
    T s = 0;
    for (std::size_t c = 0; c < d; ++c) s += qi[c] * kj[c];
    scores[j] = s * scale;
    mx = std::max(mx, scores[j]);
  }
  T total = 0;
  std::fill(out, out + d, T(0));
  for (std::size_t j = 0; j < count; ++j) {
    const T p = std::exp(scores[j] - mx);
    total += p;
    const T* vj = key_at(j).second;
    for (std::size_t c = 0; c < d; ++c) out[c] += p * vj[c];
  }
  for (std::size_t c = 0; c < d; ++c) out[c] /= total;
  // dot + scale, max, exp, sum, weighted value per key; final division.
  count_flops(flops, count * (kFlopsPerMac * d + 1 + 1 + kFlopsPerExp + 1 + kFlopsPerMac * d) + d);
}

}  // namespace

template <class T>
Seq<T> causal_full_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, FullKVCache<T>& cache,
                             FlopCounter* flops) {
  if (cache.heads == 0 && cache.d == 0) {
    cache.heads = q.heads;
    cache.d = q.d;
  }
  const std::size_t h = cache.heads, d = cache.d;
  check(q, k, v, h, d);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Seq<T> out(q.n, h, d);
  std::vector<T> scores;
  for (std::size_t i = 0; i < q.n; ++i) {
    cache.keys.insert(cache.keys.end(), k.row(i, 0), k.row(i, 0) + h * d);
    cache.values.insert(cache.values.end(), v.row(i, 0), v.row(i, 0) + h * d);
    const std::size_t count = cache.tokens();
    for (std::size_t hh = 0; hh < h; ++hh) {
      auto key_at = [&](std::size_t j) {
        const std::size_t off = (j * h + hh) * d;
        return std::pair<const T*, const T*>(cache.keys.data() + off, cache.values.data() + off);
      };
      softmax_row(q.row(i, hh), count, key_at, d, scale, scores, out.row(i, hh), flops);
    }
  }
  return out;
}

template <class T>
LocalKVCache<T>::LocalKVCache(std::size_t heads_, std::size_t d_, std::size_t window_)
    : heads(heads_), d(d_), window(window_) {
  if (window == 0) throw std::invalid_argument("local attention window must be at least 1");
  keys.resize(window * heads * d);
  values.resize(window * heads * d);
}

template <class T>
Seq<T> causal_local_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, LocalKVCache<T>& cache,
                              FlopCounter* flops) {
  if (cache.window == 0) throw std::invalid_argument("local attention window must be at least 1");
  const std::size_t h = cache.heads, d = cache.d, w = cache.window;
  check(q, k, v, h, d);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Seq<T> out(q.n, h, d);
  std::vector<T> scores;
  for (std::size_t i = 0; i < q.n; ++i) {
    std::copy(k.row(i, 0), k.row(i, 0) + h * d, cache.keys.begin() + static_cast<std::ptrdiff_t>(cache.head * h * d));
    std::copy(v.row(i, 0), v.row(i, 0) + h * d,
              cache.values.begin() + static_cast<std::ptrdiff_t>(cache.head * h * d));
    cache.head = (cache.head + 1) % w;
    cache.filled = std::min(cache.filled + 1, w);
    // Oldest entry first so sums run in token order.
    const std::size_t oldest = (cache.head + w - cache.filled) % w;
    for (std::size_t hh = 0; hh < h; ++hh) {
      auto key_at = [&](std::size_t j) {
        const std::size_t off = (((oldest + j) % w) * h + hh) * d;
        return std::pair<const T*, const T*>(cache.keys.data() + off, cache.values.data() + off);
      };
      softmax_row(q.row(i, hh), cache.filled, key_at, d, scale, scores, out.row(i, hh), flops);
    }
  }
  return out;
}

template <class T>
LinearState<T>::LinearState(std::size_t heads_, std::size_t d_)
    : heads(heads_), d(d_), state(heads_ * d_ * d_), key_sum(heads_ * d_) {}

template <class T>
Seq<T> causal_linear_attention(const Seq<T>& q, const Seq<T>& k, const Seq<T>& v, LinearState<T>& st, T eps,
                               FlopCounter* flops) {
  const std::size_t h = st.heads, d = st.d;
  check(q, k, v, h, d);
  Seq<T> out(q.n, h, d);
  std::vector<T> fq(d), fk(d);
  for (std::size_t i = 0; i < q.n; ++i) {
    for (std::size_t hh = 0; hh < h; ++hh) {
      T* S = st.state.data() + hh * d * d;
      T* z = st.key_sum.data() + hh * d;
      const T* qi = q.row(i, hh);
      const T* ki = k.row(i, hh);
      const T* vi = v.row(i, hh);
      for (std::size_t c = 0; c < d; ++c) {
        fq[c] = std::max(qi[c], T(0));
        fk[c] = std::max(ki[c], T(0));
      }
      for (std::size_t a = 0; a < d; ++a) {
        z[a] += fk[a];
        for (std::size_t b = 0; b < d; ++b) S[a * d + b] += fk[a] * vi[b];
      }
      T den = 0;
      for (std::size_t a = 0; a < d; ++a) den += fq[a] * z[a];
      den += eps;
      T* o = out.row(i, hh);
      std::fill(o, o + d, T(0));
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) o[b] += fq[a] * S[a * d + b];
      }
      for (std::size_t b = 0; b < d; ++b) o[b] /= den;
      // relu 2d, state update, key sum, denominator, numerator, division.
      count_flops(flops, 2 * d + kFlopsPerMac * d * d + d + kFlopsPerMac * d + 1 + kFlopsPerMac * d * d + d);
    }
  }
  return out;
}

#define LINVID_INSTANTIATE(T)                                                                                   \
  template Seq<T> causal_full_attention(const Seq<T>&, const Seq<T>&, const Seq<T>&, FullKVCache<T>&,           \
                                        FlopCounter*);                                                          \
  template struct LocalKVCache<T>;                                                                              \
  template Seq<T> causal_local_attention(const Seq<T>&, const Seq<T>&, const Seq<T>&, LocalKVCache<T>&,         \
                                         FlopCounter*);                                                         \
  template struct LinearState<T>;                                                                               \
  template Seq<T> causal_linear_attention(const Seq<T>&, const Seq<T>&, const Seq<T>&, LinearState<T>&, T,      \
                                          FlopCounter*);

LINVID_INSTANTIATE(float)
LINVID_INSTANTIATE(double)

#undef LINVID_INSTANTIATE

}  // namespace linvid::bench
