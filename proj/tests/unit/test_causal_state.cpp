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

#include <gtest/gtest.h>

#include <sstream>

#include "linvid/causal_state.hpp"
#include "linvid/ops.hpp"
#include "linvid/oracles.hpp"
#include "linvid/rng.hpp"

namespace linvid {
namespace {

const RopeConfig kRope{4, 6, 6, 10000.0};

TEST(CausalState, RecurrentMatchesDirect) {
  Rng rng(1);
  const BlockLayout layout{2, 2, 3};
  const std::size_t per = layout.tokens_per_block(), blocks = 3, n = per * blocks;
  const TokenGrid grid{blocks * 2, 2, 3};
  const Tensor q = gaussian({n, 2, 16}, rng), k = gaussian({n, 2, 16}, rng), v = gaussian({n, 2, 16}, rng);
  LayerKVCache cache = LayerKVCache::empty(2, 16);
  Tensor got;
  for (std::size_t b = 0; b < blocks; ++b) {
    auto r = causal_linear_attention_recurrent(slice_rows(q, b * per, (b + 1) * per),
                                               slice_rows(k, b * per, (b + 1) * per),
                                               slice_rows(v, b * per, (b + 1) * per), cache, layout, grid, kRope);
    got = b == 0 ? r.out : concat_rows(got, r.out);
    cache = std::move(r.cache);
  }
  EXPECT_EQ(cache.tokens_seen, n);
  EXPECT_LE(max_rel_err(got, causal_linear_attention_direct(q, k, v, grid, kRope, kDefaultAttentionEps, per)), 1e-12);
}

TEST(CausalState, CacheSizeIndependentOfTokens) {
  Rng rng(2);
  const BlockLayout layout{1, 2, 2};
  const TokenGrid grid{50, 2, 2};
  LayerKVCache cache = LayerKVCache::empty(1, 16);
  const std::size_t start = cache_size_bytes(cache);
  for (int b = 0; b < 50; ++b) {
    const Tensor x = gaussian({4, 1, 16}, rng);
    cache = causal_linear_attention_recurrent(x, x, x, cache, layout, grid, kRope).cache;
    EXPECT_EQ(cache_size_bytes(cache), start);
  }
  EXPECT_EQ(start, cache_payload_bytes(1, 16, 0, 0, sizeof(double)));
}

TEST(CausalState, RejectsWrongBlockSize) {
  Rng rng(3);
  const Tensor x = gaussian({3, 1, 16}, rng);
  EXPECT_THROW(causal_linear_attention_recurrent(x, x, x, LayerKVCache::empty(1, 16), BlockLayout{1, 2, 2},
                                                 TokenGrid{2, 2, 2}, kRope),
               ShapeError);
}

TEST(CausalState, SnapshotRoundTrip) {
  Rng rng(4);
  LayerKVCache c = LayerKVCache::empty(2, 4);
  c.state_sum = gaussian({2, 4, 4}, rng);
  c.key_sum = gaussian({2, 4}, rng);
  c.conv_cache = gaussian({6, 8}, rng);
  c.tokens_seen = 12;
  std::stringstream ss;
  save_cache(c, ss);
  const LayerKVCache back = load_cache(ss);
  EXPECT_TRUE(bitwise_equal(back.state_sum, c.state_sum));
  EXPECT_TRUE(bitwise_equal(back.key_sum, c.key_sum));
  ASSERT_TRUE(back.conv_cache.has_value());
  EXPECT_TRUE(bitwise_equal(*back.conv_cache, *c.conv_cache));
  EXPECT_EQ(back.tokens_seen, 12u);
}

TEST(CausalState, TruncatedSnapshotThrows) {
  LayerKVCache c = LayerKVCache::empty(1, 2);
  std::stringstream ss;
  save_cache(c, ss);
  const std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 3));
  EXPECT_ANY_THROW(load_cache(cut));
}

class ConvStreaming : public ::testing::TestWithParam<ConvCacheMode> {};

TEST_P(ConvStreaming, StreamEqualsOneShot) {
  const ConvCacheMode mode = GetParam();
  Rng rng(5);
  const std::size_t fpb = 2, blocks = 4, s = 3, d = 5;
  const Tensor x = gaussian({fpb * blocks, s, d}, rng);
  const Tensor w = gaussian({3, d, d}, rng), b = gaussian({d}, rng);
  const Tensor oneshot = block_causal_conv(x, w, b, mode, fpb);
  std::optional<Tensor> cache;
  Tensor streamed;
  for (std::size_t i = 0; i < blocks; ++i) {
    auto r = causal_temporal_conv(slice_rows(x, i * fpb, (i + 1) * fpb), cache, w, b, mode);
    streamed = i == 0 ? r.out : concat_rows(streamed, r.out);
    cache = r.cache;
    EXPECT_EQ(cache->dim(0), conv_cache_frames(mode) * s);
  }
  EXPECT_TRUE(bitwise_equal(streamed, oneshot));
}

TEST_P(ConvStreaming, MatchesSlidingOracle) {
  const ConvCacheMode mode = GetParam();
  Rng rng(6);
  const std::size_t fpb = 2;
  const Tensor x = gaussian({6, 2, 3}, rng), w = gaussian({3, 3, 3}, rng), b = gaussian({3}, rng);
  const std::array<int, 3> offsets =
      mode == ConvCacheMode::kTwoFrameCausal ? std::array<int, 3>{-2, -1, 0} : std::array<int, 3>{-1, 0, 1};
  const Tensor want =
      oracle::temporal_conv(x, w, b, offsets, mode == ConvCacheMode::kTwoFrameCausal ? 0 : fpb);
  EXPECT_LE(max_abs_diff(block_causal_conv(x, w, b, mode, fpb), want), 1e-13);
}

INSTANTIATE_TEST_SUITE_P(Modes, ConvStreaming,
                         ::testing::Values(ConvCacheMode::kTwoFrameCausal, ConvCacheMode::kOneFrameBlockCentered),
                         [](const auto& info) {
                           return info.param == ConvCacheMode::kTwoFrameCausal ? "TwoFrame" : "OneFrame";
                         });

TEST(CausalConv, FutureFramesDoNotLeak) {
  Rng rng(7);
  const Tensor x = gaussian({4, 1, 2}, rng), w = gaussian({3, 2, 2}, rng), b = gaussian({2}, rng);
  Tensor y = x;
  y[3 * 2] += 5.0;  // frame 3 lives in block 1
  for (ConvCacheMode mode : {ConvCacheMode::kTwoFrameCausal, ConvCacheMode::kOneFrameBlockCentered}) {
    EXPECT_TRUE(bitwise_equal(slice_rows(block_causal_conv(x, w, b, mode, 2), 0, 2),
                              slice_rows(block_causal_conv(y, w, b, mode, 2), 0, 2)));
  }
}

}  // namespace
}  // namespace linvid
