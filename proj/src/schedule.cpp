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

#include "linvid/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "linvid/ops.hpp"

namespace linvid {

RFSchedule RFSchedule::uniform(std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("schedule needs at least one step");
  RFSchedule s;
  for (std::size_t j = steps; j >= 1; --j) s.t.push_back(static_cast<double>(j) / static_cast<double>(steps));
  return s;
}

void RFSchedule::validate() const {
  if (t.empty()) throw std::invalid_argument("empty timestep schedule");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw std::invalid_argument("timestep outside [0, 1]");
    if (i > 0 && !(t[i] < t[i - 1])) throw std::invalid_argument("timesteps must strictly decrease");
  }
}

bool BlockSchedule::is_monotone() const { return std::is_sorted(t.begin(), t.end()); }

namespace {

void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, 1]");
}

}  // namespace

RFSample rf_interpolate(const Tensor& x0, const Tensor& noise, double t) {
  check_t(t);
  if (!x0.same_shape(noise)) {
    throw ShapeError("rf_interpolate: " + shape_str(x0.shape()) + " vs " + shape_str(noise.shape()));
  }
  RFSample s{Tensor(x0.shape()), Tensor(x0.shape())};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    s.x_t[i] = (1.0 - t) * x0[i] + t * noise[i];
    s.v_target[i] = noise[i] - x0[i];
  }
  return s;
}

Tensor velocity_to_x0(const Tensor& x_t, const Tensor& v, double t) {
  check_t(t);
  if (!x_t.same_shape(v)) throw ShapeError("velocity_to_x0: " + shape_str(x_t.shape()) + " vs " + shape_str(v.shape()));
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - t * v[i];
  return out;
}

Tensor psi_step(const Tensor& x0_hat, const Tensor& noise, double t_next) {
  check_t(t_next);
  if (!x0_hat.same_shape(noise)) {
    throw ShapeError("psi_step: " + shape_str(x0_hat.shape()) + " vs " + shape_str(noise.shape()));
  }
  Tensor out(x0_hat.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t_next) * x0_hat[i] + t_next * noise[i];
  return out;
}

double SnrSampler::from_normal(double z) const { return sigmoid(loc + scale * z); }

double SnrSampler::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double z = (std::log(t / (1.0 - t)) - loc) / scale;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double snr_sample(Rng& rng, const SnrSampler& sampler) { return sampler.sample(rng); }

BlockSchedule monotonic_block_sample(std::size_t blocks, Rng& rng, const SnrSampler& sampler) {
  if (blocks == 0) throw std::invalid_argument("monotonic_block_sample needs at least one block");
  BlockSchedule s;
  s.t.resize(blocks);
  s.pivot = static_cast<std::size_t>(rng.below(blocks));
  const double tp = sampler.sample(rng);
  s.t[s.pivot] = tp;
  std::vector<double> before(s.pivot), after(blocks - s.pivot - 1);
  for (double& x : before) x = rng.uniform(0.0, tp);
  for (double& x : after) x = rng.uniform(tp, 1.0);
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  std::copy(before.begin(), before.end(), s.t.begin());
  std::copy(after.begin(), after.end(), s.t.begin() + static_cast<std::ptrdiff_t>(s.pivot) + 1);
  return s;
}

}  // namespace linvid
