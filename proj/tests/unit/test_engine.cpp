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

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "linvid/engine.hpp"
#include "linvid/ops.hpp"
#include "linvid/oracles.hpp"
#include "linvid/rng.hpp"

namespace linvid {
namespace {

FunctionDenoiser zero_denoiser(Shape s) {
  return FunctionDenoiser(std::move(s), [](const Tensor& x, std::span<const double>) { return Tensor(x.shape()); });
}

TEST(Engine, ZeroModelMatchesHandChain) {
  FunctionDenoiser den = zero_denoiser({1, 2, 2, 1});
  GenerationRequest req;
  req.blocks = 4;
  req.schedule = RFSchedule::uniform(5);
  req.seed = 3;
  const GenerationResult r = generate(den, req);
  ASSERT_EQ(r.trace.blocks.size(), 4u);
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_TRUE(bitwise_equal(r.trace.blocks[b], oracle::zero_model_block(3, b, {1, 2, 2, 1}, req.schedule.t)));
  }
}

TEST(Engine, TraceLayout) {
  FunctionDenoiser den = zero_denoiser({1, 1, 1, 1});
  GenerationRequest req;
  req.blocks = 3;
  req.schedule = RFSchedule::uniform(4);
  const GenerationResult r = generate(den, req);
  EXPECT_EQ(r.trace.records.size(), 3u * (4 + 1));
  EXPECT_EQ(r.trace.commits(), 3u);
  for (const auto& rec : r.trace.records) {
    if (rec.event == TraceEvent::kCommit) {
      EXPECT_EQ(rec.t, 0.0);
    }
  }
  const std::string csv = r.trace.to_csv();
  EXPECT_EQ(csv.rfind("block,", 0), 0u);
}

TEST(Engine, DeterministicPerSeed) {
  const ModelConfig cfg;
  const LinearDiT model(cfg, init_params(cfg, 1));
  Rng rng(2);
  DiTDenoiser den(model, gaussian({2, cfg.cond_dim}, rng));
  GenerationRequest req;
  req.blocks = 2;
  req.schedule = RFSchedule::uniform(3);
  req.seed = 5;
  const Tensor a = generate(den, req).video;
  const Tensor b = generate(den, req).video;
  EXPECT_TRUE(bitwise_equal(a, b));
  req.seed = 6;
  EXPECT_FALSE(bitwise_equal(a, generate(den, req).video));
}

TEST(Engine, GaussianVelocityMatchesRegression) {
  Rng rng(3);
  for (double t : {0.2, 0.5, 0.8}) {
    for (double x : {1.0, 2.5}) {
      EXPECT_NEAR(gaussian_optimal_velocity(x, t, 2.0, 0.25), oracle::regressed_velocity(x, t, 2.0, 0.25, 200000, rng),
                  0.02);
    }
  }
}

TEST(Engine, SingleStepIsOneShotPrediction) {
  // T = 1: output = x_1 - v(x_1, 1).
  FunctionDenoiser den({1, 1, 2, 1}, [](const Tensor& x, std::span<const double>) { return scale(x, 0.5); });
  GenerationRequest req;
  req.schedule = RFSchedule::uniform(1);
  req.seed = 9;
  const GenerationResult r = generate(den, req);
  Rng noise(derive_seed(9, 0, 0));
  const Tensor x1 = gaussian({1, 1, 2, 1}, noise);
  EXPECT_TRUE(bitwise_equal(r.video, scale(x1, 0.5)));
}

TEST(Engine, I2VHoldsConditionFrame) {
  const ModelConfig cfg;
  const LinearDiT model(cfg, init_params(cfg, 4));
  Rng rng(5);
  DiTDenoiser den(model, gaussian({2, cfg.cond_dim}, rng));
  GenerationRequest req;
  req.blocks = 2;
  req.schedule = RFSchedule::uniform(3);
  req.condition = gaussian({1, cfg.grid_h, cfg.grid_w, cfg.in_channels}, rng);
  const GenerationResult r = generate_i2v(den, req);
  EXPECT_TRUE(bitwise_equal(slice_rows(r.video, 0, 1), *req.condition));
  req.condition.reset();
  EXPECT_THROW(generate_i2v(den, req), std::invalid_argument);
}

TEST(Engine, NonFiniteVelocityReported) {
  FunctionDenoiser den({1, 1, 1, 1}, [](const Tensor& x, std::span<const double>) {
    return Tensor::full(x.shape(), std::nan(""));
  });
  GenerationRequest req;
  req.blocks = 2;
  try {
    generate(den, req);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.block, 0u);
  }
}

TEST(Engine, RolloutAndClip) {
  FunctionDenoiser den = zero_denoiser({1, 1, 1, 1});
  GenerationRequest req;
  req.schedule = RFSchedule::uniform(2);
  req.seed = 4;
  req.blocks = 5;
  const GenerationResult full = generate(den, req);
  const GenerationResult clip = rollout_and_clip(den, 5, 2, 4, req);
  EXPECT_TRUE(bitwise_equal(clip.video, slice_rows(full.video, 1, 4)));
  EXPECT_THROW(rollout_and_clip(den, 5, 0, 2, req), std::out_of_range);
  EXPECT_THROW(rollout_and_clip(den, 5, 4, 6, req), std::out_of_range);
}

TEST(Engine, DiTCacheConstantAcrossBlocks) {
  const ModelConfig cfg;
  const LinearDiT model(cfg, init_params(cfg, 6));
  Rng rng(7);
  DiTDenoiser den(model, gaussian({2, cfg.cond_dim}, rng));
  GenerationRequest req;
  req.blocks = 6;
  req.schedule = RFSchedule::uniform(2);
  const GenerationResult r = generate(den, req);
  std::vector<std::size_t> bytes;
  for (const auto& rec : r.trace.records) {
    if (rec.event == TraceEvent::kCommit) bytes.push_back(rec.cache_bytes);
  }
  ASSERT_EQ(bytes.size(), 6u);
  for (std::size_t i = 1; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], bytes[0]);
}

TEST(Latent, FileRoundTripIsFloat32) {
  Rng rng(8);
  const Tensor x = gaussian({2, 3, 1, 2}, rng);
  const auto path = std::filesystem::temp_directory_path() / "linvid_latent_test.bin";
  write_latent(x, path.string());
  const Tensor back = read_latent(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(back.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(x[i])));
}

}  // namespace
}  // namespace linvid
