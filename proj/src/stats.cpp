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

#include "linvid/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace linvid::stats {

double Moments::standard_error() const { return n ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }

Moments moments(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("moments need at least two samples");
  Moments m;
  m.n = xs.size();
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(m.n - 1);
  return m;
}

double chi_square_uniform_pvalue(const std::vector<std::size_t>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi-square needs at least two cells");
  double total = 0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (std::size_t c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double p = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace linvid::stats
