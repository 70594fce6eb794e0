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

#include <array>
#include <cstdint>

#include "linvid/tensor.hpp"

namespace linvid {

/// splitmix64 finalizer; used for seeding and for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

/// Hash-combines a base seed with stream coordinates, e.g. (seed, block, step).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// xoshiro256** generator. The state is expanded from the seed with splitmix64,
/// so identical seeds give identical streams on every platform.
///
/// Gaussians use the Box-Muller transform on two uniforms drawn from
/// uniform() and return the cosine branch only; no value is cached between
/// calls, which keeps every draw a pure function of the stream position.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double gaussian();

 private:
  std::array<std::uint64_t, 4> s_{};
};

Tensor gaussian(const Shape& shape, Rng& rng, double stddev = 1.0);
Tensor uniform(const Shape& shape, Rng& rng, double lo, double hi);

}  // namespace linvid
