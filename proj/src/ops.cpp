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

#include "linvid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace linvid {

namespace {

// True when b's shape equals the trailing axes of a's shape.
bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <class Op>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Op op) {
  if (a.same_shape(b)) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  if (!is_suffix(a.shape(), b.shape()) || b.size() == 0) {
    throw ShapeError(std::string(name) + ": cannot combine " + shape_str(a.shape()) + " with " +
                     shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const std::size_t inner = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i % inner]);
  return out;
}

template <class Op>
Tensor unary(const Tensor& x, Op op) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = op(x[i]);
  return out;
}

std::size_t last_dim(const Tensor& x, const char* name) {
  if (x.rank() == 0) throw ShapeError(std::string(name) + " needs rank >= 1");
  return x.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, FlopCounter* flops) {
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2 operands");
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  if (k != kb) {
    throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  const bool shared_b = batch_b.empty();
  if (!shared_b && batch_a != batch_b) {
    throw ShapeError("matmul batch axes disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t batch = shape_numel(batch_a);
  Shape out_shape = batch_a;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* ab = pa + bi * m * k;
    const double* bb = pb + (shared_b ? 0 : bi * k * n);
    double* ob = po + bi * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* orow = ob + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ab[i * k + p];
        const double* brow = bb + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  count_flops(flops, kFlopsPerMac * batch * m * k * n);
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose needs rank >= 2");
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t n = a.dim(a.rank() - 1);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  Tensor out(shape);
  const std::size_t batch = a.size() / std::max<std::size_t>(m * n, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[b * m * n + j * m + i] = a[b * m * n + i * n + j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, "add", [](double x, double y) { return x + y; }); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, "mul", [](double x, double y) { return x * y; }); }

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("sub: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; });
}

void axpy(double alpha, const Tensor& x, Tensor& acc) {
  if (!x.same_shape(acc)) throw ShapeError("axpy: " + shape_str(x.shape()) + " vs " + shape_str(acc.shape()));
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += alpha * x[i];
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor silu(const Tensor& x) {
  return unary(x, [](double v) { return v * sigmoid(v); });
}

Tensor layer_norm(const Tensor& x, const Tensor* gamma, const Tensor* beta, double eps) {
  const std::size_t d = last_dim(x, "layer_norm");
  if ((gamma && gamma->shape() != Shape{d}) || (beta && beta->shape() != Shape{d})) {
    throw ShapeError("layer_norm affine parameters must be [" + std::to_string(d) + "]");
  }
  Tensor out(x.shape());
  const std::size_t rows = d ? x.size() / d : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      double v = (row[c] - mu) * inv;
      if (gamma) v *= (*gamma)[c];
      if (beta) v += (*beta)[c];
      out[r * d + c] = v;
    }
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  const std::size_t d = last_dim(x, "softmax");
  Tensor out(x.shape());
  const std::size_t rows = d ? x.size() / d : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data().data() + r * d;
    double* orow = out.data().data() + r * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < d; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      orow[c] = std::exp(row[c] - mx);
      total += orow[c];
    }
    for (std::size_t c = 0; c < d; ++c) orow[c] /= total;
  }
  return out;
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

double mean(const Tensor& x) { return x.size() ? sum(x) / static_cast<double>(x.size()) : 0.0; }

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") on " +
                     shape_str(x.shape()));
  }
  Shape shape = x.shape();
  const std::size_t row = x.dim(0) ? x.size() / x.dim(0) : 0;
  shape[0] = end - begin;
  return Tensor(shape, std::vector<double>(x.vec().begin() + static_cast<std::ptrdiff_t>(begin * row),
                                           x.vec().begin() + static_cast<std::ptrdiff_t>(end * row)));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("concat_rows: " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> data = a.vec();
  data.insert(data.end(), b.vec().begin(), b.vec().end());
  return Tensor(shape, std::move(data));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 2 || begin > end || end > x.dim(1)) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") on " +
                     shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const std::size_t w = end - begin;
  Tensor out({rows, w});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = x[r * cols + begin + c];
  }
  return out;
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
  if (x.rank() != 2) throw ShapeError("repeat_rows needs a 2-D tensor, got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  Tensor out({rows * times, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < times; ++k) {
      std::copy_n(x.data().data() + r * cols, cols, out.data().data() + (r * times + k) * cols);
    }
  }
  return out;
}

Tensor conv1d_temporal(const Tensor& x, const Tensor& weight, const Tensor& bias, FlopCounter* flops) {
  if (x.rank() != 3) throw ShapeError("conv1d_temporal expects x[T,S,D], got " + shape_str(x.shape()));
  const std::size_t frames = x.dim(0);
  const std::size_t spatial = x.dim(1);
  const std::size_t d = x.dim(2);
  if (weight.shape() != Shape{kTemporalKernel, d, d} || bias.shape() != Shape{d}) {
    throw ShapeError("conv1d_temporal weight must be [3," + std::to_string(d) + "," + std::to_string(d) +
                     "] and bias [" + std::to_string(d) + "]");
  }
  Tensor out(x.shape());
  const std::size_t frame_size = spatial * d;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < spatial; ++s) {
      double* orow = out.data().data() + t * frame_size + s * d;
      std::copy_n(bias.data().data(), d, orow);
      for (std::size_t k = 0; k < kTemporalKernel; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - 1;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
        const double* xrow = x.data().data() + static_cast<std::size_t>(src) * frame_size + s * d;
        const double* w = weight.data().data() + k * d * d;
        for (std::size_t i = 0; i < d; ++i) {
          const double xv = xrow[i];
          for (std::size_t j = 0; j < d; ++j) orow[j] += xv * w[i * d + j];
        }
      }
    }
  }
  count_flops(flops, kFlopsPerMac * kTemporalKernel * frames * spatial * d * d);
  return out;
}

}  // namespace linvid
