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

#include "linvid/model.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>

#include "linvid/linear_attention.hpp"
#include "linvid/ops.hpp"
#include "linvid/rng.hpp"

namespace linvid {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (in_channels == 0 || width == 0 || depth == 0 || heads == 0 || ffn_dim == 0) fail("sizes must be positive");
  if (width % heads != 0) fail("width must be divisible by heads");
  if (frames_per_block == 0 || grid_h == 0 || grid_w == 0) fail("block layout must be positive");
  if (cond_dim == 0) fail("cond_dim must be positive");
  if (freq_dim == 0 || freq_dim % 2 != 0) fail("freq_dim must be positive and even");
  if (!(attention_eps > 0.0)) fail("attention_eps must be positive");
  rope.validate(head_dim());
}

namespace {

Tensor weight(Rng& rng, std::size_t in, std::size_t out) {
  return gaussian({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

// Expected shapes, visited in the same order as visit_params.
DiTParams param_shapes(const ModelConfig& c) {
  const std::size_t w = c.width;
  DiTParams p;
  p.patch_w = Tensor({c.in_channels, w});
  p.patch_b = Tensor({w});
  p.time_w1 = Tensor({c.freq_dim, w});
  p.time_b1 = Tensor({w});
  p.time_w2 = Tensor({w, w});
  p.time_b2 = Tensor({w});
  p.mod_w = Tensor({w, 6 * w});
  p.mod_b = Tensor({6 * w});
  p.cond_w = Tensor({c.cond_dim, w});
  p.cond_b = Tensor({w});
  for (std::size_t i = 0; i < c.depth; ++i) {
    LayerParamsT<Tensor> l;
    for (Tensor* t : {&l.attn_q_w, &l.attn_k_w, &l.attn_v_w, &l.attn_o_w, &l.cross_q_w, &l.cross_k_w, &l.cross_v_w,
                      &l.cross_o_w}) {
      *t = Tensor({w, w});
    }
    for (Tensor* t : {&l.attn_q_b, &l.attn_k_b, &l.attn_v_b, &l.attn_o_b, &l.cross_norm_g, &l.cross_norm_b,
                      &l.cross_q_b, &l.cross_k_b, &l.cross_v_b, &l.cross_o_b, &l.ffn_out_b, &l.tconv_b}) {
      *t = Tensor({w});
    }
    l.ffn_in_w = Tensor({w, c.ffn_dim});
    l.ffn_in_b = Tensor({c.ffn_dim});
    l.ffn_gate_w = Tensor({w, c.ffn_dim});
    l.ffn_gate_b = Tensor({c.ffn_dim});
    l.ffn_out_w = Tensor({c.ffn_dim, w});
    l.tconv_w = Tensor({kTemporalKernel, w, w});
    l.modulation = Tensor({6 * w});
    p.layers.push_back(std::move(l));
  }
  p.final_modulation = Tensor({2 * w});
  p.final_w = Tensor({w, c.in_channels});
  p.final_b = Tensor({c.in_channels});
  return p;
}

}  // namespace

DiTParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DiTParams p = param_shapes(cfg);
  Rng rng(seed);
  visit_params(p, [&](const std::string& name, Tensor& t) {
    const bool is_matrix = t.rank() == 2;
    if (name.ends_with("tconv_w") || name.ends_with("tconv_b")) return;  // identity init: stays zero
    if (name.ends_with("cross_norm_g")) {
      t = Tensor::full(t.shape(), 1.0);
    } else if (is_matrix) {
      t = weight(rng, t.dim(0), t.dim(1));
    }
  });
  return p;
}

void check_param_shapes(const ModelConfig& cfg, const DiTParams& params) {
  const DiTParams expected = param_shapes(cfg);
  if (params.layers.size() != expected.layers.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.layers.size()) + " layers, config says " +
                     std::to_string(expected.layers.size()));
  }
  std::vector<Shape> shapes;
  visit_params(expected, [&](const std::string&, const Tensor& t) { shapes.push_back(t.shape()); });
  std::size_t i = 0;
  visit_params(params, [&](const std::string& name, const Tensor& t) {
    if (t.shape() != shapes[i]) {
      throw ShapeError("parameter " + name + " has shape " + shape_str(t.shape()) + ", expected " +
                       shape_str(shapes[i]));
    }
    ++i;
  });
}

std::size_t param_count(const DiTParams& params) {
  std::size_t n = 0;
  visit_params(params, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

DiTVars constant_vars(const DiTParams& params) {
  DiTVars vars;
  vars.layers.resize(params.layers.size());
  // Walk both structures in lockstep.
  std::vector<const Tensor*> src;
  visit_params(params, [&](const std::string&, const Tensor& t) { src.push_back(&t); });
  std::size_t i = 0;
  visit_params(vars, [&](const std::string&, Var& v) { v = Var::constant(*src[i++]); });
  return vars;
}

std::size_t ModelCache::size_bytes() const {
  std::size_t bytes = 0;
  for (const LayerKVCache& l : layers) bytes += cache_size_bytes(l);
  return bytes;
}

Tensor timestep_features(std::span<const double> t, std::size_t dim) {
  const std::size_t half = dim / 2;
  Tensor out({t.size(), dim});
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      const double arg = 1000.0 * t[i] * freq;
      out[i * dim + k] = std::cos(arg);
      out[i * dim + half + k] = std::sin(arg);
    }
  }
  return out;
}

LinearDiT::LinearDiT(ModelConfig cfg, DiTParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  check_param_shapes(cfg_, params_);
  consts_ = constant_vars(params_);
}

ModelCache LinearDiT::empty_cache() const {
  ModelCache cache;
  for (std::size_t i = 0; i < cfg_.depth; ++i) cache.layers.push_back(LayerKVCache::empty(cfg_.heads, cfg_.head_dim()));
  return cache;
}

std::vector<double> LinearDiT::frame_timesteps(std::span<const double> t_per_block, std::size_t frames) const {
  if (t_per_block.size() == 1) return std::vector<double>(frames, t_per_block[0]);
  if (frames % cfg_.frames_per_block != 0 || t_per_block.size() != frames / cfg_.frames_per_block) {
    throw std::invalid_argument(std::to_string(t_per_block.size()) + " block timesteps do not fit " +
                                std::to_string(frames) + " frames with " + std::to_string(cfg_.frames_per_block) +
                                " frames per block");
  }
  std::vector<double> out;
  out.reserve(frames);
  for (double t : t_per_block) out.insert(out.end(), cfg_.frames_per_block, t);
  return out;
}

namespace {

enum class ConvKind { kSymmetric, kBlockCausal, kNone };

struct Plan {
  std::size_t frames = 0;
  std::size_t attention_block_tokens = 0;
  ConvKind conv = ConvKind::kSymmetric;
  bool temporal = true;
  const ModelCache* cache_in = nullptr;
  ModelCache* cache_out = nullptr;
  FlopCounter* flops = nullptr;
};

Var modulate(const Var& h, const Var& shift, const Var& scale) {
  return ag::add(ag::mul(h, ag::add_scalar(scale, 1.0)), shift);
}

struct TimeConditioning {
  Var t_emb;       // [T, w]
  Var shared_mod;  // [T, 6w]
};

TimeConditioning time_conditioning(const ModelConfig& cfg, const DiTVars& p, std::span<const double> t_frames,
                                   FlopCounter* flops) {
  const Var tfeat = Var::constant(timestep_features(t_frames, cfg.freq_dim));
  const Var t_emb = ag::linear(ag::silu(ag::linear(tfeat, p.time_w1, p.time_b1, flops)), p.time_w2, p.time_b2, flops);
  return {t_emb, ag::linear(ag::silu(t_emb), p.mod_w, p.mod_b, flops)};
}

// Gated FFN on h[N, w] plus the temporal conv shortcut. y3 receives the FFN
// output as [frames, S, w] when the causal conv ran.
Var mix_ffn(const ModelConfig& cfg, const LayerParamsT<Var>& l, const Var& h, std::size_t frames, ConvKind conv,
            const Tensor* history, FlopCounter* flops, Var* y3_out) {
  const std::size_t n = h.shape()[0];
  const Var gate = ag::silu(ag::linear(h, l.ffn_gate_w, l.ffn_gate_b, flops));
  const Var inner = ag::mul(gate, ag::linear(h, l.ffn_in_w, l.ffn_in_b, flops));
  const Var y = ag::linear(inner, l.ffn_out_w, l.ffn_out_b, flops);
  if (conv == ConvKind::kNone) return y;
  const Var y3 = ag::reshape(y, {frames, cfg.tokens_per_frame(), cfg.width});
  Var c;
  if (conv == ConvKind::kSymmetric) {
    c = ag::conv1d_temporal(y3, l.tconv_w, l.tconv_b, flops);
  } else {
    c = ag::block_causal_conv(y3, l.tconv_w, l.tconv_b, cfg.conv_mode, cfg.frames_per_block, history, flops);
  }
  if (y3_out) *y3_out = y3;
  return ag::add(y, ag::reshape(c, {n, cfg.width}));
}

Var layer_forward(const ModelConfig& cfg, const LayerParamsT<Var>& l, std::size_t li, const Var& x_in,
                  const Var& shared_mod, const Var& cond_tokens, const Plan& plan) {
  const std::size_t w = cfg.width;
  const std::size_t spatial = cfg.tokens_per_frame();
  const std::size_t n = plan.frames * spatial;
  const std::size_t heads = cfg.heads;
  const std::size_t hd = cfg.head_dim();
  const std::size_t offset = plan.cache_in ? plan.cache_in->tokens_seen() : 0;
  FlopCounter* flops = plan.flops;

  const TokenGrid grid{(offset + n) / spatial, cfg.grid_h, cfg.grid_w};
  const TokenGrid frame_grid{1, cfg.grid_h, cfg.grid_w};
  auto rope = [&](const Var& x) {
    if (plan.temporal) return ag::rope_rotate(x, grid, cfg.rope, offset);
    // Image model: every frame rotated as frame 0.
    Var out;
    for (std::size_t f = 0; f < plan.frames; ++f) {
      Var r = ag::rope_rotate(ag::slice_rows(x, f * spatial, (f + 1) * spatial), frame_grid, cfg.rope, 0);
      out = f == 0 ? r : ag::concat_rows(out, r);
    }
    return out;
  };

  Var x = x_in;
  const Var mod = ag::add(shared_mod, l.modulation);
  auto chunk = [&](std::size_t i) { return ag::repeat_rows(ag::slice_cols(mod, i * w, (i + 1) * w), spatial); };
  const Var shift1 = chunk(0), scale1 = chunk(1), gate1 = chunk(2);
  const Var shift2 = chunk(3), scale2 = chunk(4), gate2 = chunk(5);

  // Linear self-attention with RoPE after the ReLU feature map.
  const Var h = modulate(ag::layer_norm(x, nullptr, nullptr, cfg.norm_eps), shift1, scale1);
  const Var q = ag::reshape(ag::linear(h, l.attn_q_w, l.attn_q_b, flops), {n, heads, hd});
  const Var k = ag::reshape(ag::linear(h, l.attn_k_w, l.attn_k_b, flops), {n, heads, hd});
  const Var v = ag::reshape(ag::linear(h, l.attn_v_w, l.attn_v_b, flops), {n, heads, hd});
  const Var fq = ag::relu(q);
  const Var fk = ag::relu(k);
  const LayerKVCache* lc = plan.cache_in ? &plan.cache_in->layers[li] : nullptr;
  AttentionPrefix prefix;
  if (lc) prefix = lc->prefix();
  AttentionPrefix totals;
  const Var att = ag::block_linear_attention(rope(fq), rope(fk), v, fq, fk, plan.attention_block_tokens,
                                             cfg.attention_eps, lc ? &prefix : nullptr, flops,
                                             plan.cache_out ? &totals : nullptr);
  const Var att_out = ag::linear(ag::reshape(att, {n, w}), l.attn_o_w, l.attn_o_b, flops);
  x = ag::add(x, ag::mul(gate1, att_out));

  // Cross-attention to the conditioning tokens.
  const Var hc = ag::layer_norm(x, &l.cross_norm_g, &l.cross_norm_b, cfg.norm_eps);
  const Var cq = ag::linear(hc, l.cross_q_w, l.cross_q_b, flops);
  const Var ck = ag::linear(cond_tokens, l.cross_k_w, l.cross_k_b, flops);
  const Var cv = ag::linear(cond_tokens, l.cross_v_w, l.cross_v_b, flops);
  const Var ca = ag::multihead_softmax_attention(cq, ck, cv, heads, 1.0 / std::sqrt(static_cast<double>(hd)), flops);
  x = ag::add(x, ag::linear(ca, l.cross_o_w, l.cross_o_b, flops));

  const Var hf = modulate(ag::layer_norm(x, nullptr, nullptr, cfg.norm_eps), shift2, scale2);
  const Tensor* history = lc && lc->conv_cache ? &*lc->conv_cache : nullptr;
  Var y3;
  const Var y = mix_ffn(cfg, l, hf, plan.frames, plan.temporal ? plan.conv : ConvKind::kNone, history, flops, &y3);
  x = ag::add(x, ag::mul(gate2, y));

  if (plan.cache_out) {
    std::optional<Tensor> next_conv;
    if (plan.temporal && plan.conv == ConvKind::kBlockCausal) {
      next_conv = next_conv_cache(y3.value(), lc ? lc->conv_cache : std::optional<Tensor>(), cfg.conv_mode);
    }
    plan.cache_out->layers[li] = {std::move(totals.state_sum), std::move(totals.key_sum), std::move(next_conv),
                                  offset + n};
  }
  return x;
}

Var run(const ModelConfig& cfg, const DiTVars& p, const Var& latent_tokens, std::span<const double> t_frames,
        const Var& cond, const Plan& plan) {
  const std::size_t w = cfg.width;
  const std::size_t spatial = cfg.tokens_per_frame();
  FlopCounter* flops = plan.flops;

  const TimeConditioning tc = time_conditioning(cfg, p, t_frames, flops);
  const Var cond_tokens = ag::linear(cond, p.cond_w, p.cond_b, flops);

  Var x = ag::linear(latent_tokens, p.patch_w, p.patch_b, flops);
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    x = layer_forward(cfg, p.layers[li], li, x, tc.shared_mod, cond_tokens, plan);
  }

  const Var table = ag::reshape(p.final_modulation, {1, 2 * w});
  const Var fshift = ag::add(tc.t_emb, ag::reshape(ag::slice_cols(table, 0, w), {w}));
  const Var fscale = ag::add(tc.t_emb, ag::reshape(ag::slice_cols(table, w, 2 * w), {w}));
  const Var hfin = modulate(ag::layer_norm(x, nullptr, nullptr, cfg.norm_eps), ag::repeat_rows(fshift, spatial),
                            ag::repeat_rows(fscale, spatial));
  return ag::linear(hfin, p.final_w, p.final_b, flops);
}

Plan full_sequence_plan(const ModelConfig& cfg, std::size_t frames, const ForwardOptions& options) {
  Plan plan;
  plan.frames = frames;
  plan.temporal = options.temporal;
  plan.flops = options.flops;
  if (options.mode == SequenceMode::kBidirectional) {
    plan.attention_block_tokens = std::max<std::size_t>(frames * cfg.tokens_per_frame(), 1);
    plan.conv = ConvKind::kSymmetric;
  } else {
    plan.attention_block_tokens = cfg.layout().tokens_per_block();
    plan.conv = ConvKind::kBlockCausal;
  }
  return plan;
}

void check_latent(const ModelConfig& cfg, const Shape& shape) {
  if (shape.size() != 4 || shape[1] != cfg.grid_h || shape[2] != cfg.grid_w || shape[3] != cfg.in_channels) {
    throw ShapeError("latent must be [T," + std::to_string(cfg.grid_h) + "," + std::to_string(cfg.grid_w) + "," +
                     std::to_string(cfg.in_channels) + "], got " + shape_str(shape));
  }
}

void check_cond(const ModelConfig& cfg, const Shape& shape) {
  if (shape.size() != 2 || shape[1] != cfg.cond_dim || shape[0] == 0) {
    throw ShapeError("cond must be [tokens," + std::to_string(cfg.cond_dim) + "], got " + shape_str(shape));
  }
}

}  // namespace

Var LinearDiT::forward_vars(const DiTVars& params, const Var& latent, std::span<const double> t_per_frame,
                            const Var& cond, const ForwardOptions& options) const {
  check_latent(cfg_, latent.shape());
  check_cond(cfg_, cond.shape());
  const std::size_t frames = latent.shape()[0];
  if (t_per_frame.size() != frames) {
    throw std::invalid_argument("expected " + std::to_string(frames) + " frame timesteps, got " +
                                std::to_string(t_per_frame.size()));
  }
  const std::size_t n = frames * cfg_.tokens_per_frame();
  const Plan plan = full_sequence_plan(cfg_, frames, options);
  const Var tokens = ag::reshape(latent, {n, cfg_.in_channels});
  const Var out = run(cfg_, params, tokens, t_per_frame, cond, plan);
  return ag::reshape(out, latent.shape());
}

Tensor LinearDiT::forward(const Tensor& latent, std::span<const double> t_per_block, const Tensor& cond,
                          const ForwardOptions& options) const {
  check_latent(cfg_, latent.shape());
  const std::vector<double> t_frames = frame_timesteps(t_per_block, latent.dim(0));
  return forward_vars(consts_, Var::constant(latent), t_frames, Var::constant(cond), options).value();
}

BlockForward LinearDiT::forward_block(const Tensor& block, std::span<const double> t_per_frame, const Tensor& cond,
                                      const ModelCache& cache, FlopCounter* flops) const {
  check_latent(cfg_, block.shape());
  check_cond(cfg_, cond.shape());
  if (block.dim(0) != cfg_.frames_per_block) {
    throw ShapeError("block has " + std::to_string(block.dim(0)) + " frames, layout expects " +
                     std::to_string(cfg_.frames_per_block));
  }
  if (t_per_frame.size() != block.dim(0)) throw std::invalid_argument("one timestep per block frame is required");
  if (cache.layers.size() != cfg_.depth) throw std::invalid_argument("cache depth does not match the model");
  const std::size_t seen = cache.tokens_seen();
  for (const LayerKVCache& l : cache.layers) {
    if (l.tokens_seen != seen) throw std::invalid_argument("per-layer caches disagree on tokens_seen");
    if (l.tokens_seen % cfg_.layout().tokens_per_block() != 0) {
      throw std::invalid_argument("cache offset is not a whole number of blocks");
    }
    if (seen > 0 && !l.conv_cache) throw std::invalid_argument("non-empty cache is missing its conv cache");
  }
  BlockForward result{Tensor(), ModelCache{std::vector<LayerKVCache>(cfg_.depth)}};
  Plan plan;
  plan.frames = block.dim(0);
  plan.attention_block_tokens = cfg_.layout().tokens_per_block();
  plan.conv = ConvKind::kBlockCausal;
  plan.cache_in = &cache;
  plan.cache_out = &result.cache;
  plan.flops = flops;
  const std::size_t n = block.dim(0) * cfg_.tokens_per_frame();
  const Var out = run(cfg_, consts_, Var::constant(block.reshape({n, cfg_.in_channels})), t_per_frame,
                      Var::constant(cond), plan);
  result.velocity = out.value().reshape(block.shape());
  return result;
}

MixFfnResult LinearDiT::mix_ffn_forward(std::size_t layer, const Tensor& h, SequenceMode mode,
                                        const std::optional<Tensor>& conv_cache) const {
  if (layer >= cfg_.depth) throw std::out_of_range("layer " + std::to_string(layer) + " out of range");
  if (h.rank() != 3 || h.dim(1) != cfg_.tokens_per_frame() || h.dim(2) != cfg_.width) {
    throw ShapeError("mix_ffn input must be [T," + std::to_string(cfg_.tokens_per_frame()) + "," +
                     std::to_string(cfg_.width) + "], got " + shape_str(h.shape()));
  }
  const std::size_t frames = h.dim(0);
  const std::size_t n = frames * cfg_.tokens_per_frame();
  if (conv_cache && mode == SequenceMode::kBidirectional) {
    throw std::invalid_argument("bidirectional mix_ffn takes no conv cache");
  }
  const ConvKind kind = mode == SequenceMode::kBidirectional ? ConvKind::kSymmetric : ConvKind::kBlockCausal;
  Var y3;
  const Var out = mix_ffn(cfg_, consts_.layers[layer], Var::constant(h.reshape({n, cfg_.width})), frames, kind,
                          conv_cache ? &*conv_cache : nullptr, nullptr, &y3);
  MixFfnResult result{out.value().reshape(h.shape()), std::nullopt};
  if (kind == ConvKind::kBlockCausal) result.conv_cache = next_conv_cache(y3.value(), conv_cache, cfg_.conv_mode);
  return result;
}

Tensor LinearDiT::layer_forward(std::size_t layer, const Tensor& x, std::span<const double> t_per_frame,
                                const Tensor& cond, const ForwardOptions& options) const {
  if (layer >= cfg_.depth) throw std::out_of_range("layer " + std::to_string(layer) + " out of range");
  check_cond(cfg_, cond.shape());
  const std::size_t frames = t_per_frame.size();
  if (x.rank() != 2 || x.dim(1) != cfg_.width || x.dim(0) != frames * cfg_.tokens_per_frame()) {
    throw ShapeError("layer input " + shape_str(x.shape()) + " does not match " + std::to_string(frames) +
                     " frames of width " + std::to_string(cfg_.width));
  }
  const Plan plan = full_sequence_plan(cfg_, frames, options);
  const TimeConditioning tc = time_conditioning(cfg_, consts_, t_per_frame, options.flops);
  const Var cond_tokens = ag::linear(Var::constant(cond), consts_.cond_w, consts_.cond_b, options.flops);
  return linvid::layer_forward(cfg_, consts_.layers[layer], layer, Var::constant(x), tc.shared_mod, cond_tokens, plan)
      .value();
}

}  // namespace linvid
