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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linvid/autograd.hpp"
#include "linvid/causal_state.hpp"
#include "linvid/flops.hpp"
#include "linvid/rope.hpp"
#include "linvid/tensor.hpp"

namespace linvid {

/// Reference constants of the full-size 2B video model. Documentation only;
/// nothing at desk scale is instantiated with them.
struct ReferenceScaleConstants {
  static constexpr std::size_t kWidth = 2240;
  static constexpr std::size_t kDepth = 20;
  static constexpr std::size_t kFfnDim = 6720;
  static constexpr std::size_t kHeads = 20;
  static constexpr std::size_t kHeadDim = 112;
  static constexpr std::size_t kParamsMillions = 2056;
  /// (t, h, w) RoPE split chosen for head_dim 112.
  static RopeConfig rope() { return {32, 40, 40, 10000.0}; }
};

/// Toy Linear-DiT hyperparameters.
struct ModelConfig {
  std::size_t in_channels = 4;
  std::size_t width = 64;  // model dim
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t ffn_dim = 192;
  std::size_t frames_per_block = 2;
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  std::size_t cond_dim = 16;
  std::size_t freq_dim = 32;  // sinusoidal timestep features
  RopeConfig rope{4, 6, 6, 10000.0};
  double attention_eps = kDefaultAttentionEps;
  double norm_eps = 1e-6;
  ConvCacheMode conv_mode = ConvCacheMode::kTwoFrameCausal;

  std::size_t head_dim() const { return heads ? width / heads : 0; }
  std::size_t tokens_per_frame() const { return grid_h * grid_w; }
  BlockLayout layout() const { return {frames_per_block, grid_h, grid_w}; }
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Per-layer parameters. T is Tensor for storage and Var for a forward pass.
template <class T>
struct LayerParamsT {
  T attn_q_w, attn_q_b, attn_k_w, attn_k_b, attn_v_w, attn_v_b, attn_o_w, attn_o_b;
  T cross_norm_g, cross_norm_b;
  T cross_q_w, cross_q_b, cross_k_w, cross_k_b, cross_v_w, cross_v_b, cross_o_w, cross_o_b;
  T ffn_in_w, ffn_in_b, ffn_gate_w, ffn_gate_b, ffn_out_w, ffn_out_b;
  T tconv_w, tconv_b;  // temporal conv shortcut, zero at init
  T modulation;        // [6 * width], added to the shared adaLN modulation
};

template <class T>
struct DiTParamsT {
  T patch_w, patch_b;                     // in_channels -> width
  T time_w1, time_b1, time_w2, time_b2;   // freq_dim -> width -> width
  T mod_w, mod_b;                         // width -> 6 * width, shared by all layers
  T cond_w, cond_b;                       // cond_dim -> width
  std::vector<LayerParamsT<T>> layers;
  T final_modulation;                     // [2 * width]
  T final_w, final_b;                     // width -> in_channels
};

using DiTParams = DiTParamsT<Tensor>;
using DiTVars = DiTParamsT<Var>;

/// Calls f(name, member) for every parameter in a fixed order.
template <class P, class F>
void visit_params(P& p, F&& f) {
  f("patch_w", p.patch_w);
  f("patch_b", p.patch_b);
  f("time_w1", p.time_w1);
  f("time_b1", p.time_b1);
  f("time_w2", p.time_w2);
  f("time_b2", p.time_b2);
  f("mod_w", p.mod_w);
  f("mod_b", p.mod_b);
  f("cond_w", p.cond_w);
  f("cond_b", p.cond_b);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layers." + std::to_string(i) + ".";
    f(pre + "attn_q_w", l.attn_q_w);
    f(pre + "attn_q_b", l.attn_q_b);
    f(pre + "attn_k_w", l.attn_k_w);
    f(pre + "attn_k_b", l.attn_k_b);
    f(pre + "attn_v_w", l.attn_v_w);
    f(pre + "attn_v_b", l.attn_v_b);
    f(pre + "attn_o_w", l.attn_o_w);
    f(pre + "attn_o_b", l.attn_o_b);
    f(pre + "cross_norm_g", l.cross_norm_g);
    f(pre + "cross_norm_b", l.cross_norm_b);
    f(pre + "cross_q_w", l.cross_q_w);
    f(pre + "cross_q_b", l.cross_q_b);
    f(pre + "cross_k_w", l.cross_k_w);
    f(pre + "cross_k_b", l.cross_k_b);
    f(pre + "cross_v_w", l.cross_v_w);
    f(pre + "cross_v_b", l.cross_v_b);
    f(pre + "cross_o_w", l.cross_o_w);
    f(pre + "cross_o_b", l.cross_o_b);
    f(pre + "ffn_in_w", l.ffn_in_w);
    f(pre + "ffn_in_b", l.ffn_in_b);
    f(pre + "ffn_gate_w", l.ffn_gate_w);
    f(pre + "ffn_gate_b", l.ffn_gate_b);
    f(pre + "ffn_out_w", l.ffn_out_w);
    f(pre + "ffn_out_b", l.ffn_out_b);
    f(pre + "tconv_w", l.tconv_w);
    f(pre + "tconv_b", l.tconv_b);
    f(pre + "modulation", l.modulation);
  }
  f("final_modulation", p.final_modulation);
  f("final_w", p.final_w);
  f("final_b", p.final_b);
}

/// Random initialisation from `seed`. Weights ~ N(0, 1/fan_in), biases and
/// modulation tables zero, temporal conv weight and bias exactly zero.
DiTParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Shapes of every parameter, as produced by init_params.
void check_param_shapes(const ModelConfig& cfg, const DiTParams& params);

std::size_t param_count(const DiTParams& params);

/// Wraps every tensor as an untracked Var.
DiTVars constant_vars(const DiTParams& params);

/// How a full-sequence forward handles time.
enum class SequenceMode {
  /// Every token attends to every token; symmetric zero-padded temporal conv.
  kBidirectional,
  /// Block-causal attention and conv, as seen by block-by-block inference.
  kBlockCausal,
};

struct ForwardOptions {
  SequenceMode mode = SequenceMode::kBlockCausal;
  /// false drops the temporal conv shortcut and rotates every frame as if it
  /// were frame 0: the per-frame image model.
  bool temporal = true;
  FlopCounter* flops = nullptr;
};

/// Per-layer caches of one generation session.
struct ModelCache {
  std::vector<LayerKVCache> layers;

  std::size_t tokens_seen() const { return layers.empty() ? 0 : layers.front().tokens_seen; }
  std::size_t size_bytes() const;
};

struct MixFfnResult {
  Tensor out;                         // [T, S, width]
  std::optional<Tensor> conv_cache;   // set in block-causal mode
};

struct BlockForward {
  Tensor velocity;  // [T_b, H, W, C]
  ModelCache cache; // input cache with this block folded in
};

/// The Linear-DiT velocity model.
///
/// Latents are [T, H, W, C]; tokens are 1x1 patches ordered frame-major, then
/// row-major. Conditioning is [cond_tokens, cond_dim]. Timesteps are given
/// per frame internally; public entry points accept per-block values.
class LinearDiT {
 public:
  LinearDiT(ModelConfig cfg, DiTParams params);

  const ModelConfig& config() const { return cfg_; }
  const DiTParams& params() const { return params_; }

  ModelCache empty_cache() const;

  /// u(x_t | t, c). `t_per_block` has one entry (shared by all frames) or one
  /// per block of frames_per_block frames.
  Tensor forward(const Tensor& latent, std::span<const double> t_per_block, const Tensor& cond,
                 const ForwardOptions& options = {}) const;

  /// Forward of the block that follows `cache`, one timestep per frame. The
  /// returned cache folds this block in; callers decide whether to keep it.
  BlockForward forward_block(const Tensor& block, std::span<const double> t_per_frame, const Tensor& cond,
                             const ModelCache& cache, FlopCounter* flops = nullptr) const;

  /// Differentiable forward against an arbitrary (e.g. taped) parameter set.
  Var forward_vars(const DiTVars& params, const Var& latent, std::span<const double> t_per_frame, const Var& cond,
                   const ForwardOptions& options) const;

  /// Mix-FFN of one layer on h[T, S, width]: y = FFN(h), out = y + conv(y).
  /// Bidirectional mode pads symmetrically; block-causal mode reads the
  /// previous block's trailing frames from `conv_cache` and returns the cache
  /// that follows h.
  MixFfnResult mix_ffn_forward(std::size_t layer, const Tensor& h, SequenceMode mode,
                               const std::optional<Tensor>& conv_cache = std::nullopt) const;

  /// One DiT layer on tokens x[T * S, width] with one timestep per frame.
  Tensor layer_forward(std::size_t layer, const Tensor& x, std::span<const double> t_per_frame, const Tensor& cond,
                       const ForwardOptions& options = {}) const;

  /// Expands per-block timesteps to per-frame ones for `frames` frames.
  std::vector<double> frame_timesteps(std::span<const double> t_per_block, std::size_t frames) const;

 private:
  ModelConfig cfg_;
  DiTParams params_;
  DiTVars consts_;
};

/// Sinusoidal features of t (scaled by 1000) for each entry: [n, dim].
Tensor timestep_features(std::span<const double> t, std::size_t dim);

}  // namespace linvid
