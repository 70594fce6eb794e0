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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linvid/flops.hpp"
#include "linvid/model.hpp"
#include "linvid/schedule.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

/// A velocity model plus the context it has committed so far. One instance
/// is one generation session.
class BlockDenoiser {
 public:
  virtual ~BlockDenoiser() = default;

  /// [frames_per_block, H, W, C].
  virtual Shape block_shape() const = 0;
  /// Drops all committed context.
  virtual void reset() = 0;
  /// Velocity of the next block at per-frame noise levels.
  virtual Tensor velocity(const Tensor& x_t, std::span<const double> t_per_frame, FlopCounter* flops) = 0;
  /// Folds a clean block (t = 0) into the context.
  virtual void commit(const Tensor& clean_block, FlopCounter* flops) = 0;
  virtual std::size_t cache_bytes() const = 0;
};

/// LinearDiT with its constant-size per-layer caches.
class DiTDenoiser : public BlockDenoiser {
 public:
  /// The model must outlive the denoiser.
  DiTDenoiser(const LinearDiT& model, Tensor cond);

  Shape block_shape() const override;
  void reset() override;
  Tensor velocity(const Tensor& x_t, std::span<const double> t_per_frame, FlopCounter* flops) override;
  void commit(const Tensor& clean_block, FlopCounter* flops) override;
  std::size_t cache_bytes() const override { return cache_.size_bytes(); }
  const ModelCache& cache() const { return cache_; }

 private:
  const LinearDiT* model_;
  Tensor cond_;
  ModelCache cache_;
};

/// Context-free denoiser from a plain function of (x_t, t_per_frame).
class FunctionDenoiser : public BlockDenoiser {
 public:
  using Fn = std::function<Tensor(const Tensor&, std::span<const double>)>;
  FunctionDenoiser(Shape block_shape, Fn fn);

  Shape block_shape() const override { return shape_; }
  void reset() override {}
  Tensor velocity(const Tensor& x_t, std::span<const double> t_per_frame, FlopCounter* flops) override;
  void commit(const Tensor&, FlopCounter*) override {}
  std::size_t cache_bytes() const override { return 0; }

 private:
  Shape shape_;
  Fn fn_;
};

/// E[v | x_t] for x0 ~ N(mean, variance) and unit Gaussian noise, elementwise.
double gaussian_optimal_velocity(double x_t, double t, double mean, double variance);

/// FunctionDenoiser applying gaussian_optimal_velocity to every element.
FunctionDenoiser gaussian_oracle_denoiser(Shape block_shape, double mean, double variance);

/// Which frames an image-to-video request holds clean.
enum class I2VHold { kFirstFrame, kFirstBlock };

struct GenerationRequest {
  std::size_t blocks = 1;
  RFSchedule schedule = RFSchedule::uniform(8);
  std::uint64_t seed = 0;
  /// Clean conditioning frames [k, H, W, C]: k = 1 for kFirstFrame,
  /// k = frames_per_block for kFirstBlock.
  std::optional<Tensor> condition;
  I2VHold hold = I2VHold::kFirstFrame;
};

enum class TraceEvent { kDenoise, kCommit };

struct TraceRecord {
  std::size_t block = 0;
  std::size_t step = 0;  // j in T..1; 0 for commits
  double t = 0.0;        // noise level of the model input
  TraceEvent event = TraceEvent::kDenoise;
  std::uint64_t flops = 0;
  std::size_t cache_bytes = 0;  // after the event
  std::int64_t wall_ns = 0;
};

struct GenerationTrace {
  std::vector<TraceRecord> records;
  std::vector<Tensor> blocks;  // committed clean blocks

  std::size_t commits() const;
  /// CSV with a header line; one row per record.
  std::string to_csv() const;
};

struct GenerationResult {
  Tensor video;  // [blocks * frames_per_block, H, W, C]
  GenerationTrace trace;
};

/// Thrown when a latent turns non-finite during generation.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t block, std::size_t step, const std::string& what);
  std::size_t block;
  std::size_t step;
};

/// Block-autoregressive sampling. For each block: start from noise; for
/// j = T..1 predict x0_hat = x_t - t_j v; at j = 1 commit x0_hat to the
/// denoiser context with one pass at t = 0, otherwise re-noise to t_{j-1}
/// with fresh noise. Noise for block i and step s comes from
/// derive_seed(seed, i, s), so output prefixes do not depend on `blocks`.
/// With `condition` set, the held frames stay at their clean value at every
/// step and are fed to the model at t = 0.
GenerationResult generate(BlockDenoiser& denoiser, const GenerationRequest& request);

/// generate() with a required conditioning frame.
GenerationResult generate_i2v(BlockDenoiser& denoiser, const GenerationRequest& request);

/// Generates `rollout_blocks` blocks and returns blocks first..last (1-based,
/// inclusive) together with the full trace.
GenerationResult rollout_and_clip(BlockDenoiser& denoiser, std::size_t rollout_blocks, std::size_t first,
                                  std::size_t last, const GenerationRequest& request);

/// Raw latent file: u64 rank, u64 dims, then little-endian float32 values.
void write_latent(const Tensor& latent, const std::string& path);
Tensor read_latent(const std::string& path);

}  // namespace linvid
