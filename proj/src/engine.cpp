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

#include "linvid/engine.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "linvid/rng.hpp"

namespace linvid {

DiTDenoiser::DiTDenoiser(const LinearDiT& model, Tensor cond)
    : model_(&model), cond_(std::move(cond)), cache_(model.empty_cache()) {}

Shape DiTDenoiser::block_shape() const {
  const ModelConfig& c = model_->config();
  return {c.frames_per_block, c.grid_h, c.grid_w, c.in_channels};
}

void DiTDenoiser::reset() { cache_ = model_->empty_cache(); }

Tensor DiTDenoiser::velocity(const Tensor& x_t, std::span<const double> t_per_frame, FlopCounter* flops) {
  return model_->forward_block(x_t, t_per_frame, cond_, cache_, flops).velocity;
}

void DiTDenoiser::commit(const Tensor& clean_block, FlopCounter* flops) {
  const std::vector<double> zero(clean_block.dim(0), 0.0);
  cache_ = model_->forward_block(clean_block, zero, cond_, cache_, flops).cache;
}

FunctionDenoiser::FunctionDenoiser(Shape block_shape, Fn fn) : shape_(std::move(block_shape)), fn_(std::move(fn)) {}

Tensor FunctionDenoiser::velocity(const Tensor& x_t, std::span<const double> t_per_frame, FlopCounter*) {
  return fn_(x_t, t_per_frame);
}

double gaussian_optimal_velocity(double x_t, double t, double mean, double variance) {
  // Jointly Gaussian (v, x_t) with v = eps - x0, x_t = (1 - t) x0 + t eps.
  const double var_x = (1.0 - t) * (1.0 - t) * variance + t * t;
  const double cov = t - (1.0 - t) * variance;
  return -mean + cov / var_x * (x_t - (1.0 - t) * mean);
}

FunctionDenoiser gaussian_oracle_denoiser(Shape block_shape, double mean, double variance) {
  const std::size_t frames = block_shape.at(0);
  return FunctionDenoiser(std::move(block_shape), [=](const Tensor& x, std::span<const double> t) {
    Tensor v(x.shape());
    const std::size_t per_frame = x.size() / frames;
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = gaussian_optimal_velocity(x[i], t[i / per_frame], mean, variance);
    return v;
  });
}

std::size_t GenerationTrace::commits() const {
  std::size_t n = 0;
  for (const TraceRecord& r : records) n += r.event == TraceEvent::kCommit;
  return n;
}

std::string GenerationTrace::to_csv() const {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "block,step,t,event,flops,cache_bytes,wall_ns\n";
  for (const TraceRecord& r : records) {
    out << r.block << ',' << r.step << ',' << r.t << ',' << (r.event == TraceEvent::kCommit ? "commit" : "denoise")
        << ',' << r.flops << ',' << r.cache_bytes << ',' << r.wall_ns << '\n';
  }
  return out.str();
}

NonFiniteError::NonFiniteError(std::size_t b, std::size_t s, const std::string& what)
    : std::runtime_error("non-finite " + what + " at block " + std::to_string(b) + ", step " + std::to_string(s)),
      block(b),
      step(s) {}

namespace {

std::size_t held_frames(const BlockDenoiser& d, const GenerationRequest& req) {
  if (!req.condition) return 0;
  const Shape bs = d.block_shape();
  const Tensor& c = *req.condition;
  const std::size_t want = req.hold == I2VHold::kFirstFrame ? 1 : bs[0];
  if (c.rank() != 4 || c.dim(0) != want || c.dim(1) != bs[1] || c.dim(2) != bs[2] || c.dim(3) != bs[3]) {
    throw ShapeError("conditioning frames " + shape_str(c.shape()) + " do not match " + std::to_string(want) +
                     " frame(s) of block " + shape_str(bs));
  }
  return want;
}

void pin(Tensor& x, const Tensor& condition) {
  std::copy(condition.data().begin(), condition.data().end(), x.data().begin());
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

GenerationResult generate(BlockDenoiser& denoiser, const GenerationRequest& req) {
  if (req.blocks == 0) throw std::invalid_argument("at least one block is required");
  req.schedule.validate();
  const Shape bs = denoiser.block_shape();
  const std::size_t frames = bs.at(0);
  const std::size_t per_frame = shape_numel(bs) / frames;
  const std::size_t hold = held_frames(denoiser, req);
  const std::size_t steps = req.schedule.steps();

  denoiser.reset();
  GenerationResult result;
  Shape video_shape = bs;
  video_shape[0] = frames * req.blocks;
  result.video = Tensor(video_shape);

  for (std::size_t b = 0; b < req.blocks; ++b) {
    const bool pinned = hold > 0 && b == 0;
    Rng init_rng(derive_seed(req.seed, b, 0));
    Tensor x = gaussian(bs, init_rng);
    if (pinned) pin(x, *req.condition);
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = req.schedule.t[s];
      const std::size_t j = steps - s;
      std::vector<double> tf(frames, t);
      if (pinned) std::fill(tf.begin(), tf.begin() + static_cast<std::ptrdiff_t>(hold), 0.0);

      const auto start = std::chrono::steady_clock::now();
      FlopCounter fc;
      const Tensor v = denoiser.velocity(x, tf, &fc);
      if (!v.same_shape(x)) throw ShapeError("denoiser returned " + shape_str(v.shape()) + " for " + shape_str(bs));
      if (!all_finite(v)) throw NonFiniteError(b, j, "velocity");
      Tensor x0(bs);
      for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = x[i] - tf[i / per_frame] * v[i];
      if (pinned) pin(x0, *req.condition);
      if (!all_finite(x0)) throw NonFiniteError(b, j, "x0 estimate");
      result.trace.records.push_back(
          {b, j, t, TraceEvent::kDenoise, fc.flops, denoiser.cache_bytes(), elapsed_ns(start)});

      if (j == 1) {
        const auto commit_start = std::chrono::steady_clock::now();
        FlopCounter cc;
        denoiser.commit(x0, &cc);
        result.trace.records.push_back(
            {b, 0, 0.0, TraceEvent::kCommit, cc.flops, denoiser.cache_bytes(), elapsed_ns(commit_start)});
        std::copy(x0.data().begin(), x0.data().end(),
                  result.video.data().begin() + static_cast<std::ptrdiff_t>(b * x0.size()));
        result.trace.blocks.push_back(std::move(x0));
      } else {
        Rng rng(derive_seed(req.seed, b, s + 1));
        const Tensor eps = gaussian(bs, rng);
        x = psi_step(x0, eps, req.schedule.t[s + 1]);
        if (pinned) pin(x, *req.condition);
      }
    }
  }
  return result;
}

GenerationResult generate_i2v(BlockDenoiser& denoiser, const GenerationRequest& req) {
  if (!req.condition) throw std::invalid_argument("image-to-video generation needs a conditioning frame");
  return generate(denoiser, req);
}

GenerationResult rollout_and_clip(BlockDenoiser& denoiser, std::size_t rollout_blocks, std::size_t first,
                                  std::size_t last, const GenerationRequest& req) {
  if (first < 1 || first > last || last > rollout_blocks) {
    throw std::out_of_range("clip " + std::to_string(first) + ":" + std::to_string(last) + " is not inside 1:" +
                            std::to_string(rollout_blocks));
  }
  GenerationRequest r = req;
  r.blocks = rollout_blocks;
  GenerationResult full = generate(denoiser, r);
  const std::size_t frames = denoiser.block_shape()[0];
  const std::size_t rows = full.video.size() / full.video.dim(0);
  Shape clip_shape = full.video.shape();
  clip_shape[0] = (last - first + 1) * frames;
  Tensor clip(clip_shape);
  const auto begin = full.video.data().begin() + static_cast<std::ptrdiff_t>((first - 1) * frames * rows);
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(clip.size()), clip.data().begin());
  return {std::move(clip), std::move(full.trace)};
}

void write_latent(const Tensor& latent, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  detail::put_u64(out, latent.rank());
  for (std::size_t d : latent.shape()) detail::put_u64(out, d);
  for (double v : latent.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
    out.write(bytes, 4);
  }
  if (!out) throw std::runtime_error("failed to write " + path);
}

Tensor read_latent(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::uint64_t rank = detail::get_u64(in, "latent file");
  if (rank == 0 || rank > 8) throw std::runtime_error("latent file has bad rank");
  Shape shape(rank);
  for (auto& d : shape) d = detail::get_u64(in, "latent file");
  Tensor t(shape);
  for (double& v : t.data()) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("latent file truncated");
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    v = std::bit_cast<float>(bits);
  }
  return t;
}

}  // namespace linvid
