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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "linvid/baselines.hpp"
#include "linvid/bench.hpp"
#include "linvid/linear_attention.hpp"
#include "linvid/ops.hpp"
#include "linvid/oracle_check.hpp"
#include "linvid/rng.hpp"

namespace linvid::bench {
namespace {

Seq<double> random_seq(std::size_t n, std::size_t h, std::size_t d, Rng& rng) {
  Seq<double> s(n, h, d);
  for (double& x : s.data) x = rng.gaussian();
  return s;
}

TEST(Baselines, LinearMatchesStateKernel) {
  Rng rng(1);
  const std::size_t n = 12, h = 2, d = 4;
  const Seq<double> q = random_seq(n, h, d, rng), k = random_seq(n, h, d, rng), v = random_seq(n, h, d, rng);
  LinearState<double> state(h, d);
  const Seq<double> got = causal_linear_attention(q, k, v, state, 1e-6);
  const Tensor tq = relu(Tensor({n, h, d}, q.data)), tk = relu(Tensor({n, h, d}, k.data));
  const auto want = block_linear_attention(tq, tk, Tensor({n, h, d}, v.data), tq, tk, 1, 1e-6);
  EXPECT_LE(max_rel_err(Tensor({n, h, d}, got.data), want.out), 1e-12);
  EXPECT_EQ(state.bytes(), (h * d * d + h * d) * sizeof(double));
}

TEST(Baselines, CacheGrowth) {
  Rng rng(2);
  const std::size_t h = 1, d = 4;
  FullKVCache<double> full{h, d, {}, {}};
  LocalKVCache<double> local(h, d, 3);
  for (int step = 0; step < 6; ++step) {
    const Seq<double> x = random_seq(1, h, d, rng);
    causal_full_attention(x, x, x, full);
    causal_local_attention(x, x, x, local);
  }
  EXPECT_EQ(full.tokens(), 6u);
  EXPECT_EQ(full.bytes(), 2 * 6 * d * sizeof(double));
  EXPECT_EQ(local.bytes(), 2 * 3 * d * sizeof(double));
}

TEST(Baselines, FloatAndDoubleAgree) {
  Rng rng(3);
  const Seq<double> q = random_seq(8, 1, 4, rng);
  Seq<float> qf(8, 1, 4);
  for (std::size_t i = 0; i < q.data.size(); ++i) qf.data[i] = static_cast<float>(q.data[i]);
  FullKVCache<double> cd{1, 4, {}, {}};
  FullKVCache<float> cf{1, 4, {}, {}};
  const Seq<double> od = causal_full_attention(q, q, q, cd);
  const Seq<float> of = causal_full_attention(qf, qf, qf, cf);
  for (std::size_t i = 0; i < od.data.size(); ++i) EXPECT_NEAR(od.data[i], of.data[i], 1e-5);
}

TEST(Fit, SyntheticSlopes) {
  std::vector<BenchRow> rows;
  for (std::size_t n : {100u, 200u, 400u, 800u, 1600u}) {
    const double dn = static_cast<double>(n);
    rows.push_back({Variant::kFull, n, 8, 1, 0, 1, static_cast<std::uint64_t>(3 * dn * dn), 0, 0});
    rows.push_back({Variant::kLinear, n, 8, 1, 0, 1, static_cast<std::uint64_t>(7 * dn), 0, 0});
  }
  EXPECT_NEAR(fit_slope(rows, Variant::kFull, Metric::kFlops), 2.0, 1e-9);
  EXPECT_NEAR(fit_slope(rows, Variant::kLinear, Metric::kFlops), 1.0, 1e-9);
  EXPECT_THROW(fit_slope(rows, Variant::kLocal, Metric::kFlops), std::invalid_argument);
  EXPECT_THROW(fit_loglog({1, 2, 3}, {1, 2, 3}), std::invalid_argument);
}

TEST(Csv, RoundTrip) {
  ScalingOptions o;
  o.ns = {64, 128};
  o.d = 8;
  o.heads = 1;
  o.window = 16;
  o.warmup = false;
  const auto rows = run_scaling(o);
  ASSERT_EQ(rows.size(), 6u);
  const auto back = parse_csv(to_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].variant, rows[i].variant);
    EXPECT_EQ(back[i].flops, rows[i].flops);
    EXPECT_EQ(back[i].peak_cache_bytes, rows[i].peak_cache_bytes);
    EXPECT_EQ(back[i].seed, rows[i].seed);
  }
  EXPECT_EQ(to_csv(rows).substr(0, 8), "variant,");
  EXPECT_THROW(parse_csv("nonsense\n1,2\n"), std::invalid_argument);
}

TEST(Scaling, RejectsUnsortedSizes) {
  ScalingOptions o;
  o.ns = {128, 64};
  EXPECT_THROW(run_scaling(o), std::invalid_argument);
  EXPECT_THROW(parse_variant("quadratic"), std::invalid_argument);
  EXPECT_EQ(parse_variant(variant_name(Variant::kLocal)), Variant::kLocal);
}

TEST(Stability, FixtureSeparatesModes) {
  const AdversarialFixture f = adversarial_fixture();
  const Tensor rope_free = linear_attention_denominators(f.q, f.k, f.grid, f.rope);
  const Tensor rotated = linear_attention_denominators(f.q, f.k, f.grid, f.rope, kDefaultAttentionEps,
                                                       DenominatorMode::kRotated);
  double min_free = INFINITY, min_rot = INFINITY;
  for (double x : rope_free.data()) min_free = std::min(min_free, x);
  for (double x : rotated.data()) min_rot = std::min(min_rot, x);
  EXPECT_GT(min_free, 0.0);
  EXPECT_LT(min_rot, 0.0);
}

TEST(Stability, SmallDemoPasses) {
  StabilityOptions o;
  o.trials = 2000;
  o.seed = 4;
  const StabilityReport r = stability_demo(o);
  EXPECT_TRUE(r.passed()) << r.to_text();
  EXPECT_EQ(r.rope_free.nonpositive, 0u);
  EXPECT_GT(r.rotated.nonpositive, 0u);
}

TEST(OracleCheck, AllSuitesPass) {
  for (const auto& r : oracle_check("all")) EXPECT_TRUE(r.passed) << format_check(r);
}

TEST(OracleCheck, CorruptCacheIsCaught) {
  OracleCheckOptions o;
  o.corrupt_cache = true;
  bool caught = false;
  for (const auto& r : oracle_check("cache", o)) {
    if (r.name == "recurrent_stream_vs_quadratic") caught = !r.passed;
  }
  EXPECT_TRUE(caught);
  EXPECT_THROW(oracle_check("nope"), std::invalid_argument);
}

}  // namespace
}  // namespace linvid::bench
