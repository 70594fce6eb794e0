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

#include "linvid/oracle_check.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "linvid/baselines.hpp"
#include "linvid/causal_state.hpp"
#include "linvid/engine.hpp"
#include "linvid/linear_attention.hpp"
#include "linvid/model.hpp"
#include "linvid/ops.hpp"
#include "linvid/oracles.hpp"
#include "linvid/rng.hpp"
#include "linvid/schedule.hpp"
#include "linvid/stats.hpp"

namespace linvid::bench {

namespace {

using Checks = std::vector<CheckResult>;

void add(Checks& out, const std::string& suite, const std::string& name, double error, double tol) {
  out.push_back({suite, name, std::isfinite(error) && error <= tol, error, tol});
}

std::array<std::size_t, 3> dims_of(const RopeConfig& c) { return {c.dim_t, c.dim_h, c.dim_w}; }

struct AttnCase {
  TokenGrid grid;
  RopeConfig rope;
  Tensor q, k, v;
};

AttnCase random_case(Rng& rng, std::size_t frames, std::size_t h, std::size_t w, std::size_t heads) {
  const RopeConfig rope{4, 6, 6, 10000.0};
  const std::size_t n = frames * h * w;
  return {{frames, h, w}, rope, gaussian({n, heads, 16}, rng), gaussian({n, heads, 16}, rng),
          gaussian({n, heads, 16}, rng)};
}

template <class T>
Tensor to_tensor(const Seq<T>& s) {
  Tensor t({s.n, s.heads, s.d});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(s.data[i]);
  return t;
}

Seq<double> to_seq(const Tensor& t) {
  Seq<double> s(t.dim(0), t.dim(1), t.dim(2));
  std::copy(t.data().begin(), t.data().end(), s.data.begin());
  return s;
}

Checks attention_suite(const OracleCheckOptions& o) {
  Checks out;
  const std::string S = "attention";
  Rng rng(derive_seed(o.seed, 101));
  {
    double err = 0;
    for (int rep = 0; rep < 5; ++rep) {
      const AttnCase c = random_case(rng, 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3));
      const auto coords = oracle::grid_coords(c.grid.frames, c.grid.height, c.grid.width, c.grid.tokens());
      const Tensor got = linear_attention_forward(c.q, c.k, c.v, c.grid, c.rope);
      const Tensor want = oracle::linear_attention(c.q, c.k, c.v, coords, dims_of(c.rope), c.rope.base,
                                                   kDefaultAttentionEps, c.grid.tokens());
      err = std::max(err, max_rel_err(got, want));
    }
    add(out, S, "bidirectional_vs_quadratic", err, 1e-10);
  }
  {
    double err = 0;
    for (std::size_t block : {1, 2, 4, 8}) {
      const AttnCase c = random_case(rng, 4, 2, 2, 2);
      const auto coords = oracle::grid_coords(4, 2, 2, 16);
      const Tensor got = causal_linear_attention_direct(c.q, c.k, c.v, c.grid, c.rope, kDefaultAttentionEps, block);
      const Tensor want =
          oracle::linear_attention(c.q, c.k, c.v, coords, dims_of(c.rope), c.rope.base, kDefaultAttentionEps, block);
      err = std::max(err, max_rel_err(got, want));
    }
    add(out, S, "block_causal_direct_vs_quadratic", err, 1e-10);
  }
  {
    const AttnCase c = random_case(rng, 2, 2, 3, 2);
    const Tensor a = effective_attention_map(c.q, c.k, c.grid, c.rope);
    const Tensor got = linear_attention_forward(c.q, c.k, c.v, c.grid, c.rope);
    const std::size_t n = c.grid.tokens();
    Tensor want(got.shape());
    for (std::size_t h = 0; h < 2; ++h) {
      Tensor ah({n, n}), vh({n, 16});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) ah.at({i, j}) = a.at({h, i, j});
        for (std::size_t c2 = 0; c2 < 16; ++c2) vh.at({i, c2}) = c.v.at({i, h, c2});
      }
      const Tensor oh = oracle::matmul(ah, vh);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c2 = 0; c2 < 16; ++c2) want.at({i, h, c2}) = oh.at({i, c2});
      }
    }
    add(out, S, "attention_map_times_v", max_rel_err(want, got), 1e-10);
  }
  {
    const Tensor q = gaussian({7, 3, 5}, rng), k = gaussian({9, 3, 5}, rng), v = gaussian({9, 3, 5}, rng);
    const Tensor got = softmax_attention_reference(q, k, v, 0.4);
    const Tensor want = oracle::masked_softmax_attention(q, k, v, 0.4, [](std::size_t, std::size_t) { return true; });
    add(out, S, "softmax_reference_vs_two_pass", max_abs_diff(got, want), 1e-12);
  }
  {
    const Tensor q = gaussian({40, 2, 8}, rng), k = gaussian({40, 2, 8}, rng), v = gaussian({40, 2, 8}, rng);
    FullKVCache<double> cache{2, 8, {}, {}};
    // Stream in two uneven chunks.
    const Tensor first = to_tensor(causal_full_attention(to_seq(slice_rows(q, 0, 13)), to_seq(slice_rows(k, 0, 13)),
                                                         to_seq(slice_rows(v, 0, 13)), cache));
    const Tensor second = to_tensor(causal_full_attention(
        to_seq(slice_rows(q, 13, 40)), to_seq(slice_rows(k, 13, 40)), to_seq(slice_rows(v, 13, 40)), cache));
    const Tensor got = concat_rows(first, second);
    const Tensor want = oracle::masked_softmax_attention(q, k, v, 1.0 / std::sqrt(8.0),
                                                         [](std::size_t i, std::size_t j) { return j <= i; });
    add(out, S, "full_baseline_vs_causal_mask", max_abs_diff(got, want), 1e-12);
  }
  {
    const Tensor q = gaussian({64, 2, 8}, rng), k = gaussian({64, 2, 8}, rng), v = gaussian({64, 2, 8}, rng);
    LocalKVCache<double> cache(2, 8, 8);
    const Tensor got = to_tensor(causal_local_attention(to_seq(q), to_seq(k), to_seq(v), cache));
    const Tensor want = oracle::masked_softmax_attention(
        q, k, v, 1.0 / std::sqrt(8.0), [](std::size_t i, std::size_t j) { return j <= i && i - j < 8; });
    add(out, S, "local_baseline_vs_band_mask", max_abs_diff(got, want), 1e-12);
  }
  {
    const Tensor q = gaussian({30, 2, 6}, rng), k = gaussian({30, 2, 6}, rng), v = gaussian({30, 2, 6}, rng);
    LinearState<double> st(2, 6);
    const Tensor got = to_tensor(causal_linear_attention(to_seq(q), to_seq(k), to_seq(v), st, 1e-6));
    const auto coords = oracle::grid_coords(30, 1, 1, 30);
    const Tensor want = oracle::linear_attention(q, k, v, coords, {0, 0, 0}, 10000.0, 1e-6, 1);
    add(out, S, "linear_baseline_vs_quadratic", max_rel_err(got, want), 1e-10);
  }
  {
    const Tensor x = gaussian({18, 2, 16}, rng);
    const TokenGrid grid{2, 3, 3};
    const RopeConfig rope{4, 6, 6, 10000.0};
    const Tensor got = rope_rotate(x, grid, rope, 0);
    const Tensor want = oracle::rope(x, oracle::grid_coords(2, 3, 3, 18), dims_of(rope), rope.base);
    add(out, S, "rope_vs_direct_rotation", max_abs_diff(got, want), 1e-12);
  }
  {
    const Tensor a = gaussian({7, 5}, rng), b = gaussian({5, 6}, rng);
    add(out, S, "matmul_vs_triple_loop", max_abs_diff(matmul(a, b), oracle::matmul(a, b)), 1e-12);
  }
  return out;
}

Checks cache_suite(const OracleCheckOptions& o) {
  Checks out;
  const std::string S = "cache";
  Rng rng(derive_seed(o.seed, 202));
  {
    const BlockLayout layout{2, 2, 2};
    const std::size_t blocks = 4, per = layout.tokens_per_block(), n = blocks * per, heads = 2;
    const TokenGrid grid{blocks * 2, 2, 2};
    const RopeConfig rope{4, 6, 6, 10000.0};
    const Tensor q = gaussian({n, heads, 16}, rng), k = gaussian({n, heads, 16}, rng), v = gaussian({n, heads, 16}, rng);
    LayerKVCache cache = LayerKVCache::empty(heads, 16);
    Tensor got;
    for (std::size_t b = 0; b < blocks; ++b) {
      RecurrentResult r = causal_linear_attention_recurrent(slice_rows(q, b * per, (b + 1) * per),
                                                            slice_rows(k, b * per, (b + 1) * per),
                                                            slice_rows(v, b * per, (b + 1) * per), cache, layout, grid,
                                                            rope);
      got = b == 0 ? r.out : concat_rows(got, r.out);
      cache = std::move(r.cache);
      if (o.corrupt_cache && b == 0) {
        for (double& x : cache.state_sum.data()) x += 1e-3;
      }
    }
    const Tensor want = oracle::linear_attention(q, k, v, oracle::grid_coords(blocks * 2, 2, 2, n), dims_of(rope),
                                                 rope.base, kDefaultAttentionEps, per);
    add(out, S, "recurrent_stream_vs_quadratic", max_rel_err(got, want), 1e-10);

    std::stringstream buf;
    cache.conv_cache = gaussian({2 * 4, 8}, rng);
    save_cache(cache, buf);
    const LayerKVCache back = load_cache(buf);
    const bool same = bitwise_equal(back.state_sum, cache.state_sum) && bitwise_equal(back.key_sum, cache.key_sum) &&
                      back.conv_cache && bitwise_equal(*back.conv_cache, *cache.conv_cache) &&
                      back.tokens_seen == cache.tokens_seen;
    add(out, S, "snapshot_roundtrip", same ? 0.0 : 1.0, 0.0);
  }
  {
    ModelConfig cfg;
    cfg.width = 32;
    cfg.heads = 2;
    cfg.ffn_dim = 48;
    cfg.grid_h = cfg.grid_w = 2;
    cfg.cond_dim = 8;
    DiTParams p = init_params(cfg, derive_seed(o.seed, 203));
    for (auto& l : p.layers) {
      l.tconv_w = gaussian(l.tconv_w.shape(), rng, 0.1);
      l.tconv_b = gaussian(l.tconv_b.shape(), rng, 0.1);
    }
    const LinearDiT model(cfg, p);
    const std::size_t blocks = 3, fpb = cfg.frames_per_block;
    const Tensor latent = gaussian({blocks * fpb, 2, 2, cfg.in_channels}, rng);
    const Tensor cond = gaussian({3, cfg.cond_dim}, rng);
    const std::vector<double> tb{0.2, 0.5, 0.9};
    const Tensor want = model.forward(latent, tb, cond);
    ModelCache cache = model.empty_cache();
    Tensor got;
    const std::size_t rows = fpb * 2 * 2 * cfg.in_channels;
    for (std::size_t b = 0; b < blocks; ++b) {
      Tensor block({fpb, 2, 2, cfg.in_channels},
                   std::vector<double>(latent.data().begin() + static_cast<std::ptrdiff_t>(b * rows),
                                       latent.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * rows)));
      const std::vector<double> tf(fpb, tb[b]);
      BlockForward r = model.forward_block(block, tf, cond, cache);
      got = b == 0 ? r.velocity.reshape({fpb * 4, cfg.in_channels})
                   : concat_rows(got, r.velocity.reshape({fpb * 4, cfg.in_channels}));
      cache = std::move(r.cache);
    }
    add(out, S, "model_cached_vs_oneshot", max_rel_err(got.reshape(want.shape()), want), 1e-9);
  }
  return out;
}

Checks conv_suite(const OracleCheckOptions& o) {
  Checks out;
  const std::string S = "conv";
  Rng rng(derive_seed(o.seed, 303));
  const std::size_t fpb = 2, blocks = 4, spatial = 3, d = 5;
  const Tensor x = gaussian({fpb * blocks, spatial, d}, rng);
  const Tensor w = gaussian({3, d, d}, rng), b = gaussian({d}, rng);
  for (ConvCacheMode mode : {ConvCacheMode::kTwoFrameCausal, ConvCacheMode::kOneFrameBlockCentered}) {
    std::optional<Tensor> cache;
    Tensor got;
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const Tensor xb = slice_rows(x, blk * fpb, (blk + 1) * fpb);
      CausalConvResult r = causal_temporal_conv(xb, cache, w, b, mode);
      got = blk == 0 ? r.out : concat_rows(got, r.out);
      cache = std::move(r.cache);
    }
    const Tensor want = mode == ConvCacheMode::kTwoFrameCausal
                            ? oracle::temporal_conv(x, w, b, {-2, -1, 0})
                            : oracle::temporal_conv(x, w, b, {-1, 0, 1}, fpb);
    add(out, S, mode == ConvCacheMode::kTwoFrameCausal ? "two_frame_stream_vs_oneshot" : "one_frame_stream_vs_oneshot",
        max_abs_diff(got, want), 1e-12);
  }
  add(out, S, "symmetric_vs_sliding", max_abs_diff(conv1d_temporal(x, w, b), oracle::temporal_conv(x, w, b, {-1, 0, 1})),
      1e-12);
  {
    ModelConfig cfg;
    cfg.width = 16;
    cfg.heads = 1;
    cfg.rope = {4, 6, 6, 10000.0};
    cfg.ffn_dim = 24;
    cfg.grid_h = cfg.grid_w = 2;
    DiTParams p = init_params(cfg, derive_seed(o.seed, 304));
    for (auto& l : p.layers) l.tconv_w = gaussian(l.tconv_w.shape(), rng, 0.2);
    const LinearDiT model(cfg, p);
    const Tensor h = gaussian({3 * cfg.frames_per_block, 4, 16}, rng);
    const Tensor want = model.mix_ffn_forward(0, h, SequenceMode::kBlockCausal).out;
    std::optional<Tensor> cache;
    Tensor got;
    for (std::size_t blk = 0; blk < 3; ++blk) {
      MixFfnResult r =
          model.mix_ffn_forward(0, slice_rows(h, blk * cfg.frames_per_block, (blk + 1) * cfg.frames_per_block),
                                SequenceMode::kBlockCausal, cache);
      got = blk == 0 ? r.out : concat_rows(got, r.out);
      cache = std::move(r.conv_cache);
    }
    add(out, S, "mix_ffn_stream_vs_oneshot", max_abs_diff(got, want), 1e-10);
  }
  return out;
}

Checks sched_suite(const OracleCheckOptions& o) {
  Checks out;
  const std::string S = "sched";
  Rng rng(derive_seed(o.seed, 404));
  {
    double err = 0;
    for (int rep = 0; rep < 100; ++rep) {
      const Tensor x0 = gaussian({3, 4}, rng), eps = gaussian({3, 4}, rng);
      const double t = rng.uniform();
      const RFSample s = rf_interpolate(x0, eps, t);
      err = std::max(err, max_abs_diff(velocity_to_x0(s.x_t, s.v_target, t), x0));
    }
    add(out, S, "rf_roundtrip", err, 1e-12);
  }
  {
    const double t_next = 0.6;
    std::vector<double> xs;
    const Tensor zero({1});
    for (int i = 0; i < 10000; ++i) xs.push_back(psi_step(zero, gaussian({1}, rng), t_next)[0]);
    const auto m = stats::moments(xs);
    // Standard error of a Gaussian sample variance: sigma^2 sqrt(2 / (n - 1)).
    const double se = t_next * t_next * std::sqrt(2.0 / (xs.size() - 1));
    add(out, S, "psi_variance", std::abs(m.variance - t_next * t_next) / se, 3.0);
  }
  {
    std::vector<double> ts;
    for (int i = 0; i < 100000; ++i) ts.push_back(snr_sample(rng));
    const auto m = stats::moments(ts);
    add(out, S, "snr_mean", std::abs(m.mean - 0.5) / m.standard_error(), 3.0);
  }
  {
    std::vector<std::size_t> counts(8, 0);
    std::size_t bad = 0;
    for (int i = 0; i < 100000; ++i) {
      const BlockSchedule s = monotonic_block_sample(8, rng);
      ++counts[s.pivot];
      bad += !s.is_monotone();
    }
    add(out, S, "schedules_monotone", static_cast<double>(bad), 0.0);
    // error reported as 1 - p so that the check reads error <= 0.99.
    add(out, S, "pivot_uniformity", 1.0 - stats::chi_square_uniform_pvalue(counts), 0.99);
  }
  {
    std::vector<double> ts;
    for (int i = 0; i < 20000; ++i) ts.push_back(monotonic_block_sample(1, rng).t[0]);
    const SnrSampler snr;
    const double d = stats::ks_statistic(ts, [&](double t) { return snr.cdf(t); });
    add(out, S, "single_block_marginal_ks", 1.0 - stats::ks_pvalue(d, ts.size()), 0.99);
  }
  return out;
}

Checks engine_suite(const OracleCheckOptions& o) {
  Checks out;
  const std::string S = "engine";
  const Shape bs{2, 2, 2, 3};
  {
    FunctionDenoiser zero(bs, [](const Tensor& x, std::span<const double>) { return Tensor(x.shape()); });
    GenerationRequest req;
    req.blocks = 3;
    req.schedule = RFSchedule::uniform(5);
    req.seed = derive_seed(o.seed, 505);
    const GenerationResult r = generate(zero, req);
    bool same = true;
    for (std::size_t b = 0; b < req.blocks; ++b) {
      same = same && bitwise_equal(r.trace.blocks[b], oracle::zero_model_block(req.seed, b, bs, req.schedule.t));
    }
    add(out, S, "zero_model_vs_hand_chain", same ? 0.0 : 1.0, 0.0);
    std::size_t commits_ok = 0;
    for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
      const TraceRecord& rec = r.trace.records[i];
      if (rec.event == TraceEvent::kCommit && rec.t == 0.0 && i > 0 && r.trace.records[i - 1].step == 1 &&
          r.trace.records[i - 1].block == rec.block) {
        ++commits_ok;
      }
    }
    add(out, S, "one_commit_per_block_at_t0",
        static_cast<double>(r.trace.commits() != req.blocks || commits_ok != req.blocks), 0.0);
  }
  {
    Rng rng(derive_seed(o.seed, 506));
    double err = 0;
    for (double t : {0.1, 0.4, 0.7, 0.95}) {
      for (double x : {-1.0, 0.5, 2.0}) {
        err = std::max(err, std::abs(gaussian_optimal_velocity(x, t, 2.0, 0.25) -
                                     oracle::regressed_velocity(x, t, 2.0, 0.25, 200000, rng)));
      }
    }
    add(out, S, "gaussian_velocity_vs_regression", err, 0.05);
  }
  {
    Rng rng(derive_seed(o.seed, 507));
    const Tensor w = gaussian({3, 3}, rng);
    FunctionDenoiser lin(Shape{1, 1, 1, 3}, [&](const Tensor& x, std::span<const double>) {
      return matmul(x.reshape({1, 3}), w).reshape(x.shape());
    });
    GenerationRequest req;
    req.schedule = RFSchedule::uniform(1);
    req.seed = derive_seed(o.seed, 508);
    const GenerationResult r = generate(lin, req);
    Rng r0(derive_seed(req.seed, 0, 0));
    const Tensor noise = gaussian({1, 1, 1, 3}, r0);
    const Tensor want = velocity_to_x0(noise, matmul(noise.reshape({1, 3}), w).reshape(noise.shape()), 1.0);
    add(out, S, "single_step_identity", bitwise_equal(r.video, want) ? 0.0 : 1.0, 0.0);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& oracle_suites() {
  static const std::vector<std::string> suites{"attention", "cache", "conv", "sched", "engine"};
  return suites;
}

std::vector<CheckResult> oracle_check(const std::string& suite, const OracleCheckOptions& options) {
  static const std::map<std::string, std::function<Checks(const OracleCheckOptions&)>> table{
      {"attention", attention_suite}, {"cache", cache_suite}, {"conv", conv_suite},
      {"sched", sched_suite},         {"engine", engine_suite}};
  if (suite == "all") {
    Checks all;
    for (const std::string& s : oracle_suites()) {
      Checks part = table.at(s)(options);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  const auto it = table.find(suite);
  if (it == table.end()) throw std::invalid_argument("unknown oracle suite '" + suite + "'");
  return it->second(options);
}

std::string format_check(const CheckResult& r) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(3);
  out << "check suite=" << r.suite << " name=" << r.name << " status=" << (r.passed ? "pass" : "fail")
      << " error=" << std::scientific << r.error << " tolerance=" << r.tolerance;
  return out.str();
}

}  // namespace linvid::bench
