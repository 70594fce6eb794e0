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

#include <cmath>
#include <string>
#include <vector>

#include "linvid/autograd.hpp"
#include "linvid/causal_state.hpp"
#include "linvid/linear_attention.hpp"
#include "linvid/rng.hpp"
#include "linvid/rope.hpp"

namespace linvid::testing {

struct PrimitiveCase {
  std::string name;
  ScalarFn fn;
  std::vector<Tensor> inputs;
};

// Entries at least 0.1 away from zero, for ops with a kink there.
inline Tensor away_from_zero(const Shape& s, Rng& rng) {
  Tensor t = gaussian(s, rng);
  for (double& x : t.data()) x += x >= 0 ? 0.1 : -0.1;
  return t;
}

inline Tensor positive(const Shape& s, Rng& rng) {
  Tensor t = gaussian(s, rng);
  for (double& x : t.data()) x = std::abs(x) + 0.1;
  return t;
}

// Weighted sum so every output coordinate gets a distinct cotangent.
inline Var probe(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return ag::sum(ag::mul(y, Var::constant(gaussian(y.shape(), rng))));
}

inline std::vector<PrimitiveCase> primitive_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PrimitiveCase> c;
  auto g = [&](const Shape& s) { return gaussian(s, rng); };
  c.push_back({"matmul", [](const std::vector<Var>& x) { return probe(ag::matmul(x[0], x[1]), 1); }, {g({3, 4}), g({4, 5})}});
  c.push_back({"matmul_batched_shared_rhs",
               [](const std::vector<Var>& x) { return probe(ag::matmul(x[0], x[1]), 2); },
               {g({2, 3, 4}), g({4, 2})}});
  c.push_back({"add_broadcast", [](const std::vector<Var>& x) { return probe(ag::add(x[0], x[1]), 3); },
               {g({3, 4}), g({4})}});
  c.push_back({"sub", [](const std::vector<Var>& x) { return probe(ag::sub(x[0], x[1]), 4); }, {g({3, 4}), g({3, 4})}});
  c.push_back({"mul_broadcast", [](const std::vector<Var>& x) { return probe(ag::mul(x[0], x[1]), 5); },
               {g({2, 3, 4}), g({3, 4})}});
  c.push_back({"scale", [](const std::vector<Var>& x) { return probe(ag::scale(x[0], -1.7), 6); }, {g({5})}});
  c.push_back({"add_scalar", [](const std::vector<Var>& x) { return probe(ag::add_scalar(x[0], 0.3), 7); }, {g({5})}});
  c.push_back({"relu", [](const std::vector<Var>& x) { return probe(ag::relu(x[0]), 8); }, {away_from_zero({4, 3}, rng)}});
  c.push_back({"silu", [](const std::vector<Var>& x) { return probe(ag::silu(x[0]), 9); }, {g({4, 3})}});
  c.push_back({"layer_norm", [](const std::vector<Var>& x) { return probe(ag::layer_norm(x[0], nullptr, nullptr), 10); },
               {g({3, 6})}});
  c.push_back({"layer_norm_affine",
               [](const std::vector<Var>& x) { return probe(ag::layer_norm(x[0], &x[1], &x[2]), 11); },
               {g({3, 6}), g({6}), g({6})}});
  c.push_back({"softmax", [](const std::vector<Var>& x) { return probe(ag::softmax(x[0]), 12); }, {g({3, 5})}});
  c.push_back({"sum", [](const std::vector<Var>& x) { return ag::sum(x[0]); }, {g({3, 2})}});
  c.push_back({"mean", [](const std::vector<Var>& x) { return ag::mean(x[0]); }, {g({3, 2})}});
  c.push_back({"mse", [](const std::vector<Var>& x) { return ag::mse(x[0], x[1]); }, {g({4, 3}), g({4, 3})}});
  c.push_back({"reshape", [](const std::vector<Var>& x) { return probe(ag::reshape(x[0], {6, 2}), 13); }, {g({3, 4})}});
  c.push_back({"slice_rows", [](const std::vector<Var>& x) { return probe(ag::slice_rows(x[0], 1, 3), 14); },
               {g({4, 3})}});
  c.push_back({"concat_rows", [](const std::vector<Var>& x) { return probe(ag::concat_rows(x[0], x[1]), 15); },
               {g({2, 3}), g({3, 3})}});
  c.push_back({"slice_cols", [](const std::vector<Var>& x) { return probe(ag::slice_cols(x[0], 1, 4), 16); },
               {g({3, 5})}});
  c.push_back({"repeat_rows", [](const std::vector<Var>& x) { return probe(ag::repeat_rows(x[0], 3), 17); },
               {g({2, 4})}});
  c.push_back({"conv1d_temporal",
               [](const std::vector<Var>& x) { return probe(ag::conv1d_temporal(x[0], x[1], x[2]), 18); },
               {g({4, 2, 3}), g({3, 3, 3}), g({3})}});
  c.push_back({"multihead_softmax_attention",
               [](const std::vector<Var>& x) {
                 return probe(ag::multihead_softmax_attention(x[0], x[1], x[2], 2, 0.5), 19);
               },
               {g({3, 4}), g({5, 4}), g({5, 4})}});
  c.push_back({"linear", [](const std::vector<Var>& x) { return probe(ag::linear(x[0], x[1], x[2]), 20); },
               {g({3, 4}), g({4, 2}), g({2})}});
  c.push_back({"rope_rotate",
               [](const std::vector<Var>& x) {
                 return probe(ag::rope_rotate(x[0], TokenGrid{2, 2, 2}, RopeConfig{4, 6, 6, 10000.0}, 2), 21);
               },
               {g({5, 2, 16})}});
  {
    AttentionPrefix prefix{positive({2, 4, 4}, rng), positive({2, 4}, rng)};
    for (std::size_t block : {1, 3, 6}) {
      c.push_back({"block_linear_attention_b" + std::to_string(block),
                   [prefix, block](const std::vector<Var>& x) {
                     return probe(ag::block_linear_attention(x[0], x[1], x[2], x[3], x[4], block, 1e-6, &prefix), 22);
                   },
                   {g({6, 2, 4}), g({6, 2, 4}), g({6, 2, 4}), positive({6, 2, 4}, rng), positive({6, 2, 4}, rng)}});
    }
  }
  {
    const Tensor two = g({2 * 2, 3});
    const Tensor one = g({1 * 2, 3});
    c.push_back({"block_causal_conv_two_frame",
                 [two](const std::vector<Var>& x) {
                   return probe(ag::block_causal_conv(x[0], x[1], x[2], ConvCacheMode::kTwoFrameCausal, 2, &two), 23);
                 },
                 {g({4, 2, 3}), g({3, 3, 3}), g({3})}});
    c.push_back({"block_causal_conv_one_frame",
                 [one](const std::vector<Var>& x) {
                   return probe(ag::block_causal_conv(x[0], x[1], x[2], ConvCacheMode::kOneFrameBlockCentered, 2, &one),
                                24);
                 },
                 {g({4, 2, 3}), g({3, 3, 3}), g({3})}});
  }
  return c;
}

}  // namespace linvid::testing
