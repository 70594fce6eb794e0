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

#include "linvid/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "linvid/rng.hpp"

namespace linvid {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(Var::constant(t));
  return f(vars).value().item();
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, const GradCheckOptions& options) {
  return grad_check_report(f, inputs, options).max_error;
}

GradCheckReport grad_check_report(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                  const GradCheckOptions& options) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var out = f(leaves);
  if (out.value().size() != 1) {
    throw ShapeError("grad_check needs a scalar-valued function, got " + shape_str(out.shape()));
  }
  if (!out.tracked()) throw std::logic_error("grad_check: output does not depend on any input");
  Gradients grads = tape.backward(out);

  Rng rng(options.seed);
  GradCheckReport report;
  const double center = options.skip_kinks ? out.value().item() : 0.0;
  std::vector<Tensor> work = inputs;
  for (std::size_t in = 0; in < inputs.size(); ++in) {
    const Tensor analytic = grads.of(leaves[in]);
    std::vector<std::size_t> coords(inputs[in].size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_input > 0 && coords.size() > options.max_coords_per_input) {
      // Partial Fisher-Yates shuffle.
      for (std::size_t i = 0; i < options.max_coords_per_input; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_input);
    }
    for (std::size_t c : coords) {
      const double original = work[in][c];
      work[in][c] = original + options.step;
      const double up = evaluate(f, work);
      work[in][c] = original - options.step;
      const double down = evaluate(f, work);
      work[in][c] = original;
      if (options.skip_kinks) {
        const double right = up - center, left = center - down;
        if (std::abs(right - left) > options.kink_ratio * (std::abs(right) + std::abs(left)) + 1e-14) {
          ++report.skipped;
          continue;
        }
      }
      const double fd = (up - down) / (2.0 * options.step);
      const double a = analytic[c];
      report.max_error = std::max(report.max_error, std::abs(a - fd) / (std::abs(a) + std::abs(fd) + options.abs_floor));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace linvid
