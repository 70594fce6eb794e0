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

#include "linvid/checkpoint.hpp"
#include "linvid/model.hpp"
#include "linvid/ops.hpp"
#include "linvid/rng.hpp"

namespace linvid {
namespace {

struct Toy {
  ModelConfig cfg;
  Tensor cond;
  Toy() {
    Rng rng(100);
    cond = gaussian({3, cfg.cond_dim}, rng);
  }
  Tensor latent(std::size_t frames, std::uint64_t seed) const {
    Rng rng(seed);
    return gaussian({frames, cfg.grid_h, cfg.grid_w, cfg.in_channels}, rng);
  }
};

DiTParams perturbed_params(const ModelConfig& cfg, std::uint64_t seed) {
  DiTParams p = init_params(cfg, seed);
  Rng rng(seed + 1);
  visit_params(p, [&](const std::string& name, Tensor& t) {
    if (name.find("tconv") != std::string::npos || name.find("modulation") != std::string::npos) {
      t = gaussian(t.shape(), rng, 0.1);
    }
  });
  return p;
}

TEST(ModelConfig, Validation) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.rope = {4, 6, 8, 10000.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Params, InitShapesAndZeros) {
  const ModelConfig cfg;
  const DiTParams p = init_params(cfg, 1);
  EXPECT_NO_THROW(check_param_shapes(cfg, p));
  for (const auto& l : p.layers) {
    EXPECT_TRUE(bitwise_equal(l.tconv_w, Tensor(l.tconv_w.shape())));
    EXPECT_TRUE(bitwise_equal(l.tconv_b, Tensor(l.tconv_b.shape())));
  }
  EXPECT_GT(param_count(p), 10000u);
  EXPECT_TRUE(bitwise_equal(init_params(cfg, 1).patch_w, p.patch_w));
  EXPECT_FALSE(bitwise_equal(init_params(cfg, 2).patch_w, p.patch_w));
}

TEST(Model, OutputShapeAndFinite) {
  Toy toy;
  const LinearDiT model(toy.cfg, init_params(toy.cfg, 2));
  const Tensor x = toy.latent(4, 3);
  const std::vector<double> t{0.3, 0.7};
  const Tensor y = model.forward(x, t, toy.cond);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_TRUE(all_finite(y));
}

TEST(Model, ZeroFinalProjectionGivesZero) {
  Toy toy;
  DiTParams p = perturbed_params(toy.cfg, 4);
  p.final_w = Tensor(p.final_w.shape());
  p.final_b = Tensor(p.final_b.shape());
  const LinearDiT model(toy.cfg, p);
  const std::vector<double> t{0.5};
  const Tensor y = model.forward(toy.latent(2, 5), t, toy.cond);
  EXPECT_TRUE(bitwise_equal(y, Tensor(y.shape())));
}

TEST(Model, ZeroAttentionProjectionsRemoveAttention) {
  // Causal conv only: frame 0 cannot see frame 1.
  Toy toy;
  DiTParams p = init_params(toy.cfg, 6);
  for (auto& l : p.layers) {
    l.attn_o_w = Tensor(l.attn_o_w.shape());
    l.attn_o_b = Tensor(l.attn_o_b.shape());
  }
  const LinearDiT model(toy.cfg, p);
  const Tensor x = toy.latent(2, 7);
  Tensor x2 = x;
  x2[x2.size() - 1] += 3.0;  // last token of frame 1
  const std::vector<double> t{0.4};
  const Tensor a = model.forward(x, t, toy.cond), b = model.forward(x2, t, toy.cond);
  EXPECT_TRUE(bitwise_equal(slice_rows(a, 0, 1), slice_rows(b, 0, 1)));
  EXPECT_FALSE(bitwise_equal(a, b));
}

TEST(Model, TimestepChangesOutput) {
  Toy toy;
  const LinearDiT model(toy.cfg, perturbed_params(toy.cfg, 8));
  const Tensor x = toy.latent(2, 9);
  const std::vector<double> t1{0.2}, t2{0.8};
  EXPECT_FALSE(bitwise_equal(model.forward(x, t1, toy.cond), model.forward(x, t2, toy.cond)));
}

TEST(Model, SingleFrameTemporalFlagIsExactAtInit) {
  Toy toy;
  const LinearDiT model(toy.cfg, init_params(toy.cfg, 10));
  const Tensor x = toy.latent(1, 11);
  const std::vector<double> t{0.6};
  EXPECT_TRUE(bitwise_equal(model.forward(x, t, toy.cond, {SequenceMode::kBidirectional, true, nullptr}),
                            model.forward(x, t, toy.cond, {SequenceMode::kBidirectional, false, nullptr})));
}

class CachedVsOneShot : public ::testing::TestWithParam<ConvCacheMode> {};

TEST_P(CachedVsOneShot, BlockStreamMatchesBlockCausalForward) {
  Toy toy;
  toy.cfg.conv_mode = GetParam();
  const LinearDiT model(toy.cfg, perturbed_params(toy.cfg, 12));
  const std::size_t fpb = toy.cfg.frames_per_block, blocks = 3;
  const Tensor x = toy.latent(fpb * blocks, 13);
  const std::vector<double> t{0.1, 0.5, 0.9};
  const Tensor oneshot = model.forward(x, t, toy.cond, {SequenceMode::kBlockCausal, true, nullptr});
  ModelCache cache = model.empty_cache();
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::vector<double> tf(fpb, t[b]);
    BlockForward r = model.forward_block(slice_rows(x, b * fpb, (b + 1) * fpb), tf, toy.cond, cache);
    EXPECT_LE(max_rel_err(r.velocity, slice_rows(oneshot, b * fpb, (b + 1) * fpb)), 1e-12) << "block " << b;
    cache = std::move(r.cache);
  }
  EXPECT_EQ(cache.tokens_seen(), blocks * fpb * toy.cfg.tokens_per_frame());
}

INSTANTIATE_TEST_SUITE_P(Modes, CachedVsOneShot,
                         ::testing::Values(ConvCacheMode::kTwoFrameCausal, ConvCacheMode::kOneFrameBlockCentered),
                         [](const auto& info) {
                           return info.param == ConvCacheMode::kTwoFrameCausal ? "TwoFrame" : "OneFrame";
                         });

TEST(Model, ForwardBlockRejectsBadInputs) {
  Toy toy;
  const LinearDiT model(toy.cfg, init_params(toy.cfg, 14));
  const std::vector<double> tf(toy.cfg.frames_per_block, 0.5);
  EXPECT_THROW(model.forward_block(toy.latent(3, 1), std::vector<double>(3, 0.5), toy.cond, model.empty_cache()),
               std::invalid_argument);
  EXPECT_THROW(model.forward_block(toy.latent(2, 1), std::vector<double>(1, 0.5), toy.cond, model.empty_cache()),
               std::invalid_argument);
  ModelCache shallow;
  EXPECT_THROW(model.forward_block(toy.latent(2, 1), tf, toy.cond, shallow), std::invalid_argument);
}

TEST(Model, ShapeFuzz) {
  Toy toy;
  const LinearDiT model(toy.cfg, init_params(toy.cfg, 15));
  Rng rng(16);
  const std::vector<double> t{0.5};
  for (int i = 0; i < 20; ++i) {
    Shape s{1 + rng.below(4), toy.cfg.grid_h, toy.cfg.grid_w, toy.cfg.in_channels};
    s[1 + rng.below(3)] += 1 + rng.below(2);
    EXPECT_THROW(model.forward(gaussian(s, rng), t, toy.cond), std::invalid_argument) << shape_str(s);
  }
  EXPECT_THROW(model.forward(toy.latent(2, 1), t, Tensor({3, toy.cfg.cond_dim + 1})), std::invalid_argument);
}

TEST(Model, MixFfnStreamMatchesOneShot) {
  Toy toy;
  const LinearDiT model(toy.cfg, perturbed_params(toy.cfg, 17));
  Rng rng(18);
  const std::size_t s = toy.cfg.tokens_per_frame(), fpb = toy.cfg.frames_per_block;
  const Tensor h = gaussian({3 * fpb, s, toy.cfg.width}, rng);
  const MixFfnResult oneshot = model.mix_ffn_forward(0, h, SequenceMode::kBlockCausal);
  std::optional<Tensor> cache;
  for (std::size_t b = 0; b < 3; ++b) {
    const MixFfnResult r = model.mix_ffn_forward(0, slice_rows(h, b * fpb, (b + 1) * fpb), SequenceMode::kBlockCausal,
                                                 cache);
    EXPECT_LE(max_abs_diff(r.out, slice_rows(oneshot.out, b * fpb, (b + 1) * fpb)), 1e-12);
    cache = r.conv_cache;
  }
}

TEST(Checkpoint, ParamsRoundTrip) {
  const ModelConfig cfg;
  const DiTParams p = perturbed_params(cfg, 19);
  std::stringstream ss;
  save_params(p, ss);
  const DiTParams back = load_params(cfg, ss);
  std::vector<const Tensor*> a;
  visit_params(p, [&](const std::string&, const Tensor& t) { a.push_back(&t); });
  std::size_t i = 0;
  visit_params(back, [&](const std::string& name, const Tensor& t) { EXPECT_TRUE(bitwise_equal(t, *a[i++])) << name; });
}

TEST(Checkpoint, RejectsMismatchedConfig) {
  ModelConfig cfg;
  std::stringstream ss;
  save_params(init_params(cfg, 20), ss);
  cfg.width = 32;
  cfg.ffn_dim = 96;
  EXPECT_ANY_THROW(load_params(cfg, ss));
  std::stringstream junk("not a checkpoint");
  EXPECT_ANY_THROW(load_params(ModelConfig{}, junk));
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  ModelConfig cfg;
  cfg.depth = 3;
  cfg.conv_mode = ConvCacheMode::kOneFrameBlockCentered;
  cfg.rope = {8, 4, 4, 500.0};
  const ModelConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(back.depth, 3u);
  EXPECT_EQ(back.conv_mode, ConvCacheMode::kOneFrameBlockCentered);
  EXPECT_EQ(back.rope.dim_t, 8u);
  EXPECT_EQ(back.rope.base, 500.0);
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_ANY_THROW(config_from_json(R"({"widht": 64})"));
  EXPECT_ANY_THROW(config_from_json(R"({"conv_mode": "sideways"})"));
}

TEST(TimestepFeatures, ShapeAndZero) {
  const std::vector<double> t{0.0, 0.5};
  const Tensor f = timestep_features(t, 8);
  EXPECT_EQ(f.shape(), (Shape{2, 8}));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(f.at({0, k}), 1.0);
    EXPECT_EQ(f.at({0, 4 + k}), 0.0);
  }
}

}  // namespace
}  // namespace linvid
