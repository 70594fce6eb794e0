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

#include <cmath>

#include "linvid/ops.hpp"
#include "linvid/rng.hpp"
#include "linvid/tensor.hpp"

namespace linvid {
namespace {

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  t.at({1, 2}) = 5.0;
  EXPECT_EQ(t[5], 5.0);
  EXPECT_THROW(t.at({2, 0}), std::out_of_range);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
  EXPECT_THROW((void)t.reshape({4}), ShapeError);
  EXPECT_EQ(t.reshape({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Tensor, ScalarRankZero) {
  const Tensor s = Tensor::scalar(2.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.item(), 2.5);
  EXPECT_THROW((void)Tensor({2}).item(), ShapeError);
}

TEST(Tensor, Comparisons) {
  const Tensor a = Tensor::from({1.0, 2.0, 4.0});
  const Tensor b = Tensor::from({1.0, 2.5, 4.0});
  EXPECT_TRUE(bitwise_equal(a, a));
  EXPECT_FALSE(bitwise_equal(a, b));
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 0.5);
  EXPECT_DOUBLE_EQ(max_rel_err(a, b), 0.5 / 4.0);
  EXPECT_TRUE(all_finite(a));
  Tensor c = a;
  c[1] = NAN;
  EXPECT_FALSE(all_finite(c));
}

TEST(Ops, MatmulSmall) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  FlopCounter f;
  const Tensor c = matmul(a, b, &f);
  EXPECT_EQ(c.vec(), (std::vector<double>{58, 64, 139, 154}));
  EXPECT_EQ(f.flops, 2u * 2 * 3 * 2);
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Ops, BroadcastTrailing) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor row = Tensor::from({10, 20});
  EXPECT_EQ(add(a, row).vec(), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(mul(a, row).vec(), (std::vector<double>{10, 40, 30, 80}));
  EXPECT_THROW(add(a, Tensor::from({1, 2, 3})), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(1);
  const Tensor s = softmax(gaussian({5, 7}, rng, 10.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) total += s.at({r, c});
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
}

TEST(Ops, LayerNormZeroMeanUnitVar) {
  Rng rng(2);
  const Tensor y = layer_norm(gaussian({3, 16}, rng, 3.0), nullptr, nullptr, 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 16; ++c) m += y.at({r, c});
    m /= 16;
    for (std::size_t c = 0; c < 16; ++c) v += (y.at({r, c}) - m) * (y.at({r, c}) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16, 1.0, 1e-12);
  }
}

TEST(Ops, RowSlicingRoundTrip) {
  Rng rng(3);
  const Tensor x = gaussian({6, 2, 3}, rng);
  const Tensor joined = concat_rows(slice_rows(x, 0, 2), slice_rows(x, 2, 6));
  EXPECT_TRUE(bitwise_equal(joined, x));
  EXPECT_THROW(slice_rows(x, 4, 7), ShapeError);
  EXPECT_EQ(repeat_rows(Tensor::from({1, 2}).reshape({1, 2}), 3).shape(), (Shape{3, 2}));
}

TEST(Ops, TemporalConvZeroPadded) {
  // x[T=3, S=1, D=1], identity on the centre tap only.
  const Tensor x({3, 1, 1}, {1, 2, 3});
  Tensor w({3, 1, 1});
  w[1] = 1.0;
  const Tensor y = conv1d_temporal(x, w, Tensor({1}));
  EXPECT_EQ(y.vec(), x.vec());
  Tensor left({3, 1, 1});
  left[0] = 1.0;
  EXPECT_EQ(conv1d_temporal(x, left, Tensor({1})).vec(), (std::vector<double>{0, 1, 2}));
}

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
}

TEST(Rng, GaussianMoments) {
  Rng rng(5);
  double m = 0, v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    m += g;
    v += g * g;
  }
  m /= n;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(v / n - m * m, 1.0, 0.01);
}

TEST(Rng, BelowInRange) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform_open();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace linvid
