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

#include "linvid/ops.hpp"
#include "linvid/rng.hpp"
#include "linvid/schedule.hpp"
#include "linvid/stats.hpp"
#include "linvid/training.hpp"

namespace linvid {
namespace {

TEST(RFSchedule, UniformGrid) {
  const RFSchedule s = RFSchedule::uniform(4);
  EXPECT_EQ(s.t, (std::vector<double>{1.0, 0.75, 0.5, 0.25}));
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW((RFSchedule{{0.5, 0.7}}.validate()), std::invalid_argument);
  EXPECT_THROW(RFSchedule::uniform(0), std::invalid_argument);
}

TEST(RectifiedFlow, InterpolateAndRecover) {
  Rng rng(1);
  const Tensor x0 = gaussian({3, 4}, rng), eps = gaussian({3, 4}, rng);
  for (double t : {0.0, 0.3, 1.0}) {
    const RFSample s = rf_interpolate(x0, eps, t);
    EXPECT_LE(max_abs_diff(s.v_target, sub(eps, x0)), 1e-15);
    EXPECT_LE(max_abs_diff(velocity_to_x0(s.x_t, s.v_target, t), x0), 1e-14);
  }
  EXPECT_TRUE(bitwise_equal(rf_interpolate(x0, eps, 0.0).x_t, x0));
  EXPECT_THROW(rf_interpolate(x0, eps, 1.5), std::out_of_range);
  EXPECT_THROW(rf_interpolate(x0, eps, -0.1), std::out_of_range);
}

TEST(RectifiedFlow, PsiStepIsInterpolation) {
  Rng rng(2);
  const Tensor x0 = gaussian({5}, rng), eps = gaussian({5}, rng);
  EXPECT_TRUE(bitwise_equal(psi_step(x0, eps, 0.4), rf_interpolate(x0, eps, 0.4).x_t));
}

TEST(SnrSampler, CdfInvertsSample) {
  const SnrSampler s{0.3, 0.8};
  for (double z : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    const double t = s.from_normal(z);
    EXPECT_GT(t, 0.0);
    EXPECT_LT(t, 1.0);
    EXPECT_NEAR(s.cdf(t), 0.5 * std::erfc(-z / std::sqrt(2.0)), 1e-12);
  }
}

TEST(BlockSampler, MonotoneAndPivotConsistent) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t m = 1 + rng.below(16);
    const BlockSchedule s = monotonic_block_sample(m, rng);
    ASSERT_EQ(s.t.size(), m);
    EXPECT_TRUE(s.is_monotone());
    EXPECT_LT(s.pivot, m);
    for (double t : s.t) {
      EXPECT_GE(t, 0.0);
      EXPECT_LE(t, 1.0);
    }
  }
  EXPECT_FALSE((BlockSchedule{{0.5, 0.2}, 0}.is_monotone()));
  EXPECT_THROW(monotonic_block_sample(0, rng), std::invalid_argument);
}

TEST(Stats, ChiSquareAndKs) {
  EXPECT_GT(stats::chi_square_uniform_pvalue({100, 100, 100, 100}), 0.99);
  EXPECT_LT(stats::chi_square_uniform_pvalue({400, 0, 0, 0}), 1e-10);
  Rng rng(4);
  std::vector<double> u(5000);
  for (double& x : u) x = rng.uniform();
  const double d = stats::ks_statistic(u, [](double x) { return x; });
  EXPECT_GT(stats::ks_pvalue(d, u.size()), 0.01);
  for (double& x : u) x = x * x;
  EXPECT_LT(stats::ks_pvalue(stats::ks_statistic(u, [](double x) { return x; }), u.size()), 1e-6);
}

TEST(Training, LossSampleFrameTimesFollowBlocks) {
  Rng rng(5);
  const LossSample s = draw_loss_sample({6, 2, 2, 1}, 2, rng);
  ASSERT_EQ(s.t_per_frame.size(), 6u);
  ASSERT_EQ(s.schedule.t.size(), 3u);
  for (std::size_t f = 0; f < 6; ++f) EXPECT_EQ(s.t_per_frame[f], s.schedule.t[f / 2]);
  EXPECT_THROW(draw_loss_sample({5, 2, 2, 1}, 2, rng), std::invalid_argument);
}

TEST(Training, StepLowersLossOnFixedSample) {
  const ModelConfig cfg;
  MemorizationOptions o;
  o.steps = 20;
  o.seed = 6;
  const MemorizationResult r = train_memorization(cfg, o);
  ASSERT_EQ(r.losses.size(), 20u);
  EXPECT_LT(r.losses.back(), r.losses.front());
}

TEST(Training, RejectsNegativeRate) {
  const ModelConfig cfg;
  const LinearDiT model(cfg, init_params(cfg, 7));
  Rng rng(8);
  const TrainingExample ex{gaussian({2, cfg.grid_h, cfg.grid_w, cfg.in_channels}, rng), gaussian({2, cfg.cond_dim}, rng)};
  EXPECT_THROW(train_step(model, {ex}, -1.0, rng), std::invalid_argument);
  const TrainStepResult ok = train_step(model, {ex}, 0.0, rng);
  EXPECT_TRUE(bitwise_equal(ok.params.patch_w, model.params().patch_w));
  EXPECT_TRUE(std::isfinite(ok.loss));
}

}  // namespace
}  // namespace linvid
