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

#include <cstdint>
#include <functional>
#include <vector>

#include "linvid/autograd.hpp"

namespace linvid {

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every coordinate; otherwise this many coordinates per input are
  /// drawn (without replacement) from a generator seeded with `seed`.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  /// Added to the denominator of the relative error. Parameters whose exact
  /// gradient is zero need a floor above finite-difference noise.
  double abs_floor = 1e-8;
  /// Skip coordinates where the one-sided differences disagree by more than
  /// `kink_ratio` (relative), i.e. a ReLU kink lies inside [x - h, x + h].
  bool skip_kinks = false;
  double kink_ratio = 1e-3;
};

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

using ScalarFn = std::function<Var(const std::vector<Var>&)>;

/// Compares taped gradients of a scalar-valued `f` against central
/// differences. Returns max over checked coordinates of
/// |analytic - fd| / (|analytic| + |fd| + abs_floor).
/// Throws ShapeError when f does not return a single element.
double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, const GradCheckOptions& options = {});

GradCheckReport grad_check_report(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                  const GradCheckOptions& options = {});

}  // namespace linvid
