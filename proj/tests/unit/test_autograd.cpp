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

#include "linvid/autograd.hpp"
#include "linvid/grad_check.hpp"
#include "linvid/ops.hpp"
#include "linvid/rng.hpp"
#include "primitive_cases.hpp"

namespace linvid {
namespace {

class PrimitiveGrad : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGrad, MatchesCentralDifferences) {
  const auto cases = testing::primitive_cases(99);
  const auto& pc = cases.at(GetParam());
  EXPECT_LE(grad_check(pc.fn, pc.inputs), 1e-6) << pc.name;
}

INSTANTIATE_TEST_SUITE_P(All, PrimitiveGrad, ::testing::Range<std::size_t>(0, testing::primitive_cases(0).size()),
                         [](const auto& info) { return testing::primitive_cases(0)[info.param].name; });

TEST(Autograd, UntrackedIsConstant) {
  Tape tape;
  const Var a = tape.leaf(Tensor::from({1, 2}));
  const Var c = Var::constant(Tensor::from({3, 4}));
  const Var y = ag::sum(ag::mul(a, c));
  const Gradients g = tape.backward(y);
  EXPECT_EQ(g.of(a).vec(), (std::vector<double>{3, 4}));
  EXPECT_FALSE(c.tracked());
}

TEST(Autograd, SharedInputAccumulates) {
  Tape tape;
  const Var a = tape.leaf(Tensor::from({2}));
  const Gradients g = tape.backward(ag::sum(ag::mul(a, a)));
  EXPECT_DOUBLE_EQ(g.of(a)[0], 4.0);
}

TEST(Autograd, UnusedLeafHasZeroGradient) {
  Tape tape;
  const Var a = tape.leaf(Tensor::from({2}));
  const Var b = tape.leaf(Tensor::from({1, 1}));
  const Gradients g = tape.backward(ag::sum(a));
  EXPECT_EQ(g.of(b).vec(), (std::vector<double>{0, 0}));
}

TEST(GradCheck, DetectsWrongGradient) {
  // x^2 with the backward of x.
  const ScalarFn bad = [](const std::vector<Var>& in) {
    Var y = Tape::record(mul(in[0].value(), in[0].value()), {in[0]},
                         [](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g}; });
    return ag::sum(y);
  };
  EXPECT_GT(grad_check(bad, {Tensor::from({1.0, 2.0})}), 0.1);
}

TEST(GradCheck, RejectsNonScalar) {
  const ScalarFn vec = [](const std::vector<Var>& in) { return in[0]; };
  EXPECT_THROW(grad_check(vec, {Tensor::from({1.0, 2.0})}), ShapeError);
}

TEST(GradCheck, KinkSkipping) {
  // |x| has a kink at 0; x = 1e-6 sits within one step of it.
  const ScalarFn absval = [](const std::vector<Var>& in) {
    return ag::sum(ag::add(ag::relu(in[0]), ag::relu(ag::scale(in[0], -1.0))));
  };
  GradCheckOptions o;
  o.step = 1e-5;
  EXPECT_GT(grad_check(absval, {Tensor::from({1e-6})}, o), 0.5);
  o.skip_kinks = true;
  const GradCheckReport r = grad_check_report(absval, {Tensor::from({1e-6, 0.5})}, o);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_LE(r.max_error, 1e-8);
}

}  // namespace
}  // namespace linvid
