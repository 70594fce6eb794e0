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

#include "linvid/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace linvid::oracle {

std::vector<Coord> grid_coords(std::size_t frames, std::size_t height, std::size_t width, std::size_t count,
                               std::size_t offset) {
  std::vector<Coord> out;
  std::size_t idx = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w, ++idx) {
        if (idx >= offset && out.size() < count) out.push_back({t, h, w});
      }
    }
  }
  if (out.size() != count) throw std::out_of_range("grid too small for the requested tokens");
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) throw ShapeError("oracle matmul shapes");
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at({i, k}) * b.at({k, j});
      c.at({i, j}) = s;
    }
  }
  return c;
}

Tensor rope(const Tensor& x, const std::vector<Coord>& coords, const std::array<std::size_t, 3>& dims, double base) {
  const std::size_t n = x.dim(0), heads = x.dim(1), d = x.dim(2);
  Tensor out = x;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t seg = 0;
    for (int axis = 0; axis < 3; ++axis) {
      for (std::size_t p = 0; p < dims[axis] / 2; ++p) {
        const double theta =
            static_cast<double>(coords[i][axis]) / std::pow(base, 2.0 * static_cast<double>(p) / dims[axis]);
        const std::size_t c0 = seg + 2 * p;
        for (std::size_t h = 0; h < heads; ++h) {
          const double a = x.at({i, h, c0}), b = x.at({i, h, c0 + 1});
          out.at({i, h, c0}) = std::cos(theta) * a - std::sin(theta) * b;
          out.at({i, h, c0 + 1}) = std::sin(theta) * a + std::cos(theta) * b;
        }
      }
      seg += dims[axis];
    }
    if (seg != 0 && seg != d) throw std::invalid_argument("oracle rope dims do not cover head_dim");
  }
  return out;
}

Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, const std::vector<Coord>& coords,
                        const std::array<std::size_t, 3>& dims, double base, double eps, std::size_t block_tokens) {
  const std::size_t n = q.dim(0), heads = q.dim(1), d = q.dim(2);
  Tensor fq = q, fk = k;
  for (double& x : fq.data()) x = x > 0 ? x : 0;
  for (double& x : fk.data()) x = x > 0 ? x : 0;
  const Tensor rq = rope(fq, coords, dims, base);
  const Tensor rk = rope(fk, coords, dims, base);
  const double* RQ = rq.data().data();
  const double* RK = rk.data().data();
  const double* FQ = fq.data().data();
  const double* FK = fk.data().data();
  const double* V = v.data().data();
  Tensor out(v.shape());
  std::vector<double> num(d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t qi = (i * heads + h) * d;
      double den = 0;
      std::fill(num.begin(), num.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j / block_tokens > i / block_tokens) continue;
        const std::size_t kj = (j * heads + h) * d;
        double sim = 0, plain = 0;
        for (std::size_t c = 0; c < d; ++c) {
          sim += RQ[qi + c] * RK[kj + c];
          plain += FQ[qi + c] * FK[kj + c];
        }
        den += plain;
        for (std::size_t c = 0; c < d; ++c) num[c] += sim * V[kj + c];
      }
      for (std::size_t c = 0; c < d; ++c) out[qi + c] = num[c] / (den + eps);
    }
  }
  return out;
}

Tensor masked_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                                const std::function<bool(std::size_t, std::size_t)>& mask) {
  const std::size_t n = q.dim(0), m = k.dim(0), heads = q.dim(1), d = q.dim(2);
  Tensor out({n, heads, v.dim(2)});
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(m, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < m; ++j) {
        if (!mask(i, j)) continue;
        double dot = 0;
        for (std::size_t c = 0; c < d; ++c) dot += q.at({i, h, c}) * k.at({j, h, c});
        s[j] = dot * scale;
        mx = std::max(mx, s[j]);
      }
      double total = 0;
      for (std::size_t j = 0; j < m; ++j) total += mask(i, j) ? std::exp(s[j] - mx) : 0.0;
      for (std::size_t c = 0; c < v.dim(2); ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < m; ++j) {
          if (mask(i, j)) acc += std::exp(s[j] - mx) / total * v.at({j, h, c});
        }
        out.at({i, h, c}) = acc;
      }
    }
  }
  return out;
}

Tensor temporal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, const std::array<int, 3>& offsets,
                     std::size_t block_frames) {
  const std::size_t frames = x.dim(0), spatial = x.dim(1), d = x.dim(2);
  Tensor out(x.shape());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < spatial; ++s) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = bias[j];
        for (std::size_t k = 0; k < 3; ++k) {
          const long src = static_cast<long>(t) + offsets[k];
          if (src < 0 || src >= static_cast<long>(frames)) continue;
          if (block_frames > 0 && offsets[k] > 0 && static_cast<std::size_t>(src) / block_frames != t / block_frames) {
            continue;
          }
          for (std::size_t i = 0; i < d; ++i) {
            acc += x.at({static_cast<std::size_t>(src), s, i}) * weight.at({k, i, j});
          }
        }
        out.at({t, s, j}) = acc;
      }
    }
  }
  return out;
}

double regressed_velocity(double x, double t, double mean, double variance, std::size_t samples, Rng& rng) {
  double sx = 0, sv = 0, sxx = 0, sxv = 0;
  const double sd = std::sqrt(variance);
  for (std::size_t i = 0; i < samples; ++i) {
    const double x0 = mean + sd * rng.gaussian();
    const double eps = rng.gaussian();
    const double xt = (1 - t) * x0 + t * eps;
    const double v = eps - x0;
    sx += xt;
    sv += v;
    sxx += xt * xt;
    sxv += xt * v;
  }
  const double m = static_cast<double>(samples);
  const double slope = (sxv - sx * sv / m) / (sxx - sx * sx / m);
  const double intercept = (sv - slope * sx) / m;
  return intercept + slope * x;
}

Tensor zero_model_block(std::uint64_t seed, std::size_t block, const Shape& shape, const std::vector<double>& t) {
  Rng r0(derive_seed(seed, block, 0));
  Tensor x = gaussian(shape, r0);
  // Zero velocity: every clean estimate equals the current sample.
  for (std::size_t s = 0; s + 1 < t.size(); ++s) {
    Rng rs(derive_seed(seed, block, s + 1));
    const Tensor eps = gaussian(shape, rs);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1 - t[s + 1]) * x[i] + t[s + 1] * eps[i];
  }
  return x;
}

}  // namespace linvid::oracle
