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

#include "linvid/rng.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

/// Denoising grid in visiting order: t[0] = t_T > t[1] > ... > t[T-1] = t_1.
struct RFSchedule {
  std::vector<double> t;

  /// t_j = j / T for j = T..1, so t_T = 1 and t_1 = 1/T.
  static RFSchedule uniform(std::size_t steps);
  std::size_t steps() const { return t.size(); }
  /// Strictly decreasing, nonempty, inside [0, 1]; throws std::invalid_argument.
  void validate() const;
};

/// Per-block noise levels t^1..t^M, nondecreasing.
struct BlockSchedule {
  std::vector<double> t;
  std::size_t pivot = 0;  // 0-based index of the SNR-sampled block

  bool is_monotone() const;
};

struct RFSample {
  Tensor x_t;
  Tensor v_target;
};

/// x_t = (1 - t) x0 + t noise, v = noise - x0. Throws std::out_of_range for t
/// outside [0, 1] and ShapeError on mismatched shapes.
RFSample rf_interpolate(const Tensor& x0, const Tensor& noise, double t);

/// x0_hat = x_t - t v.
Tensor velocity_to_x0(const Tensor& x_t, const Tensor& v, double t);

/// Re-noises a clean estimate: (1 - t_next) x0_hat + t_next noise.
Tensor psi_step(const Tensor& x0_hat, const Tensor& noise, double t_next);

/// Logit-normal timestep sampler: t = sigmoid(loc + scale z), z ~ N(0, 1).
struct SnrSampler {
  double loc = 0.0;
  double scale = 1.0;

  double from_normal(double z) const;
  double cdf(double t) const;
  double sample(Rng& rng) const { return from_normal(rng.gaussian()); }
};

double snr_sample(Rng& rng, const SnrSampler& sampler = {});

/// Monotone per-block schedule: a uniformly chosen pivot block gets an SNR
/// draw t_p; later blocks get sorted Uniform(t_p, 1) draws, earlier blocks
/// sorted Uniform(0, t_p) draws. Throws std::invalid_argument for M == 0.
BlockSchedule monotonic_block_sample(std::size_t blocks, Rng& rng, const SnrSampler& sampler = {});

}  // namespace linvid
