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

#include <cstdint>
#include <vector>

#include "linvid/autograd.hpp"
#include "linvid/model.hpp"
#include "linvid/schedule.hpp"

namespace linvid {

/// Random draws behind one evaluation of the flow-matching loss.
struct LossSample {
  BlockSchedule schedule;
  std::vector<double> t_per_frame;
  Tensor noise;  // same shape as x0
};

/// Draws a block schedule, then the noise, for a clean video of `shape`
/// ([T, H, W, C], T a multiple of frames_per_block).
LossSample draw_loss_sample(const Shape& shape, std::size_t frames_per_block, Rng& rng,
                            const SnrSampler& sampler = {});

/// Noised input and velocity target for every frame of x0.
RFSample noised_inputs(const Tensor& x0, const LossSample& sample);

/// mean((model(x_t, t, cond) - v_target)^2) with the model in block-causal
/// mode, differentiable in `params`.
Var flow_matching_loss(const LinearDiT& model, const DiTVars& params, const Tensor& x0, const Tensor& cond,
                       const LossSample& sample);

/// Draws a LossSample from rng and evaluates the loss at the model's own
/// parameters.
double training_loss(const LinearDiT& model, const Tensor& x0, const Tensor& cond, Rng& rng,
                     const SnrSampler& sampler = {});

struct TrainingExample {
  Tensor x0;    // [T, H, W, C]
  Tensor cond;  // [tokens, cond_dim]
};

struct TrainStepResult {
  DiTParams params;
  double loss = 0.0;
};

/// One step of plain gradient descent on the batch-mean loss. Each example
/// draws its own LossSample from rng. Throws std::invalid_argument for
/// lr < 0 and std::runtime_error on a non-finite loss or gradient.
TrainStepResult train_step(const LinearDiT& model, const std::vector<TrainingExample>& batch, double lr, Rng& rng,
                           const SnrSampler& sampler = {});

struct MemorizationOptions {
  std::size_t steps = 500;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t frames = 4;
  std::size_t cond_tokens = 4;
  /// Re-use the same noise and timesteps at every step.
  bool fixed_sample = true;
};

struct MemorizationResult {
  std::vector<double> losses;  // one per step, before the update
  DiTParams params;
};

/// Fits one clean video for `steps` steps of train_step.
MemorizationResult train_memorization(const ModelConfig& cfg, const MemorizationOptions& options);

}  // namespace linvid
