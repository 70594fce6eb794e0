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

#include "linvid/training.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace linvid {

LossSample draw_loss_sample(const Shape& shape, std::size_t frames_per_block, Rng& rng, const SnrSampler& sampler) {
  if (shape.empty() || frames_per_block == 0 || shape[0] % frames_per_block != 0) {
    throw ShapeError("clean video " + shape_str(shape) + " is not a whole number of " +
                     std::to_string(frames_per_block) + "-frame blocks");
  }
  LossSample s;
  s.schedule = monotonic_block_sample(shape[0] / frames_per_block, rng, sampler);
  for (double t : s.schedule.t) s.t_per_frame.insert(s.t_per_frame.end(), frames_per_block, t);
  s.noise = gaussian(shape, rng);
  return s;
}

RFSample noised_inputs(const Tensor& x0, const LossSample& sample) {
  if (!x0.same_shape(sample.noise) || sample.t_per_frame.size() != x0.dim(0)) {
    throw ShapeError("loss sample does not match clean video " + shape_str(x0.shape()));
  }
  RFSample out{Tensor(x0.shape()), Tensor(x0.shape())};
  const std::size_t per_frame = x0.size() / x0.dim(0);
  for (std::size_t f = 0; f < x0.dim(0); ++f) {
    const double t = sample.t_per_frame[f];
    if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("timestep outside [0, 1]");
    for (std::size_t i = f * per_frame; i < (f + 1) * per_frame; ++i) {
      out.x_t[i] = (1.0 - t) * x0[i] + t * sample.noise[i];
      out.v_target[i] = sample.noise[i] - x0[i];
    }
  }
  return out;
}

Var flow_matching_loss(const LinearDiT& model, const DiTVars& params, const Tensor& x0, const Tensor& cond,
                       const LossSample& sample) {
  const RFSample in = noised_inputs(x0, sample);
  const Var pred = model.forward_vars(params, Var::constant(in.x_t), sample.t_per_frame, Var::constant(cond),
                                      {SequenceMode::kBlockCausal, true, nullptr});
  return ag::mse(pred, Var::constant(in.v_target));
}

double training_loss(const LinearDiT& model, const Tensor& x0, const Tensor& cond, Rng& rng,
                     const SnrSampler& sampler) {
  const LossSample s = draw_loss_sample(x0.shape(), model.config().frames_per_block, rng, sampler);
  return flow_matching_loss(model, constant_vars(model.params()), x0, cond, s).value().item();
}

namespace {

TrainStepResult descend(const LinearDiT& model, const std::vector<TrainingExample>& batch,
                        const std::vector<LossSample>& samples, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  Tape tape;
  DiTVars vars;
  vars.layers.resize(model.params().layers.size());
  std::vector<const Tensor*> src;
  visit_params(model.params(), [&](const std::string&, const Tensor& t) { src.push_back(&t); });
  std::size_t i = 0;
  visit_params(vars, [&](const std::string&, Var& v) { v = tape.leaf(*src[i++]); });

  Var total;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Var l = flow_matching_loss(model, vars, batch[b].x0, batch[b].cond, samples[b]);
    total = b == 0 ? l : ag::add(total, l);
  }
  const Var loss = ag::scale(total, 1.0 / static_cast<double>(batch.size()));
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw std::runtime_error("non-finite training loss " + std::to_string(value));

  const Gradients grads = tape.backward(loss);
  TrainStepResult result{model.params(), value};
  i = 0;
  std::vector<const Var*> leaves;
  visit_params(vars, [&](const std::string&, const Var& v) { leaves.push_back(&v); });
  visit_params(result.params, [&](const std::string& name, Tensor& t) {
    const Tensor g = grads.of(*leaves[i++]);
    if (!all_finite(g)) throw std::runtime_error("non-finite gradient for " + name);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] -= lr * g[k];
  });
  return result;
}

}  // namespace

TrainStepResult train_step(const LinearDiT& model, const std::vector<TrainingExample>& batch, double lr, Rng& rng,
                           const SnrSampler& sampler) {
  std::vector<LossSample> samples;
  for (const TrainingExample& ex : batch) {
    samples.push_back(draw_loss_sample(ex.x0.shape(), model.config().frames_per_block, rng, sampler));
  }
  return descend(model, batch, samples, lr);
}

MemorizationResult train_memorization(const ModelConfig& cfg, const MemorizationOptions& options) {
  Rng data_rng(derive_seed(options.seed, 1));
  const TrainingExample example{gaussian({options.frames, cfg.grid_h, cfg.grid_w, cfg.in_channels}, data_rng),
                                gaussian({options.cond_tokens, cfg.cond_dim}, data_rng)};
  MemorizationResult result{{}, init_params(cfg, derive_seed(options.seed, 2))};
  Rng rng(derive_seed(options.seed, 3));
  const LossSample fixed = draw_loss_sample(example.x0.shape(), cfg.frames_per_block, rng);
  for (std::size_t step = 0; step < options.steps; ++step) {
    const LinearDiT model(cfg, std::move(result.params));
    TrainStepResult r = options.fixed_sample ? descend(model, {example}, {fixed}, options.lr)
                                             : train_step(model, {example}, options.lr, rng);
    result.losses.push_back(r.loss);
    result.params = std::move(r.params);
  }
  return result;
}

}  // namespace linvid
