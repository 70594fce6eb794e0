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
#include <functional>
#include <vector>

namespace linvid::stats {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  std::size_t n = 0;

  double standard_error() const;
};
Moments moments(const std::vector<double>& xs);

/// Upper-tail p-value of Pearson's chi-square statistic for `counts` against
/// equal expected frequencies.
double chi_square_uniform_pvalue(const std::vector<std::size_t>& counts);

/// sup |F_n - F| of the samples against `cdf`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Asymptotic Kolmogorov p-value for statistic d with n samples.
double ks_pvalue(double d, std::size_t n);

}  // namespace linvid::stats
