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

#include "linvid/autograd.hpp"

#include <cmath>

#include "linvid/ops.hpp"

namespace linvid {

Var Var::constant(Tensor value) {
  Var v;
  v.value_ = std::make_shared<const Tensor>(std::move(value));
  return v;
}

Tensor Gradients::of(const Var& v) const {
  if (v.id() >= 0 && static_cast<std::size_t>(v.id()) < grads_.size() && grads_[v.id()]) {
    return *grads_[v.id()];
  }
  return Tensor(v.shape());
}

Var Tape::leaf(Tensor value) {
  Var v = Var::constant(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<int>(nodes_.size());
  nodes_.push_back({v.shape(), {}, nullptr});
  return v;
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var& p : parents) {
    if (!p.tracked()) continue;
    if (tape && tape != p.tape()) throw std::logic_error("operands recorded on different tapes");
    tape = p.tape();
  }
  Var out = Var::constant(std::move(value));
  if (!tape) return out;
  Node node{out.shape(), {}, std::move(backward)};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) node.parents.push_back(p.tracked() ? p.id() : -1);
  out.tape_ = tape;
  out.id_ = static_cast<int>(tape->nodes_.size());
  tape->nodes_.push_back(std::move(node));
  return out;
}

Gradients Tape::backward(const Var& output) const {
  if (output.value().size() != 1) {
    throw ShapeError("backward needs a scalar output, got " + shape_str(output.shape()));
  }
  if (output.tape() != this) throw std::logic_error("output is not recorded on this tape");
  Gradients g;
  g.grads_.resize(nodes_.size());
  g.grads_[output.id()] = Tensor::full(output.shape(), 1.0);
  for (int id = output.id(); id >= 0; --id) {
    const Node& node = nodes_[id];
    if (!g.grads_[id] || !node.backward) continue;
    std::vector<bool> needs(node.parents.size());
    bool any = false;
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      needs[i] = node.parents[i] >= 0;
      any = any || needs[i];
    }
    if (!any) continue;
    std::vector<Tensor> parent_grads = node.backward(*g.grads_[id], needs);
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      if (!needs[i]) continue;
      const int pid = node.parents[i];
      Tensor& pg = parent_grads[i];
      if (pg.shape() != nodes_[pid].shape) {
        throw std::logic_error("gradient shape " + shape_str(pg.shape()) + " does not match node shape " +
                               shape_str(nodes_[pid].shape));
      }
      if (g.grads_[pid]) {
        axpy(1.0, pg, *g.grads_[pid]);
      } else {
        g.grads_[pid] = std::move(pg);
      }
    }
  }
  return g;
}

namespace ag {

namespace {

// Reduces a broadcast gradient back onto the trailing-axes operand shape.
Tensor reduce_to(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  Tensor out(shape);
  const std::size_t inner = out.size();
  for (std::size_t i = 0; i < grad.size(); ++i) out[i % inner] += grad[i];
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b, FlopCounter* flops) {
  Tensor out = linvid::matmul(a.value(), b.value(), flops);
  return Tape::record(std::move(out), {a, b}, [a, b](const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> r(2);
    if (needs[0]) r[0] = linvid::matmul(g, transpose(b.value()));
    if (needs[1]) {
      if (b.value().rank() == 2 && a.value().rank() > 2) {
        // Shared right operand: fold the batch into rows.
        const std::size_t k = a.value().shape().back();
        const std::size_t n = g.shape().back();
        Tensor a2 = a.value().reshape({a.value().size() / k, k});
        Tensor g2 = g.reshape({g.size() / n, n});
        r[1] = linvid::matmul(transpose(a2), g2);
      } else {
        r[1] = linvid::matmul(transpose(a.value()), g);
      }
    }
    return r;
  });
}

Var add(const Var& a, const Var& b) {
  Shape bs = b.shape();
  return Tape::record(linvid::add(a.value(), b.value()), {a, b},
                      [bs](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g, reduce_to(g, bs)}; });
}

Var sub(const Var& a, const Var& b) {
  return Tape::record(linvid::sub(a.value(), b.value()), {a, b},
                      [](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g, scale(g, -1.0)}; });
}

Var mul(const Var& a, const Var& b) {
  return Tape::record(linvid::mul(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> r(2);
    if (needs[0]) r[0] = linvid::mul(g, b.value());
    if (needs[1]) r[1] = reduce_to(linvid::mul(g, a.value()), b.shape());
    return r;
  });
}

Var scale(const Var& a, double s) {
  return Tape::record(linvid::scale(a.value(), s), {a},
                      [s](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{linvid::scale(g, s)}; });
}

Var add_scalar(const Var& a, double s) {
  return Tape::record(linvid::add_scalar(a.value(), s), {a},
                      [](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g}; });
}

Var relu(const Var& x) {
  return Tape::record(linvid::relu(x.value()), {x}, [x](const Tensor& g, const std::vector<bool>&) {
    Tensor r(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = x.value()[i] > 0.0 ? g[i] : 0.0;
    return std::vector<Tensor>{std::move(r)};
  });
}

Var silu(const Var& x) {
  return Tape::record(linvid::silu(x.value()), {x}, [x](const Tensor& g, const std::vector<bool>&) {
    Tensor r(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.value()[i];
      const double s = sigmoid(v);
      r[i] = g[i] * s * (1.0 + v * (1.0 - s));
    }
    return std::vector<Tensor>{std::move(r)};
  });
}

Var layer_norm(const Var& x, const Var* gamma, const Var* beta, double eps) {
  const Tensor* gv = gamma ? &gamma->value() : nullptr;
  const Tensor* bv = beta ? &beta->value() : nullptr;
  Tensor out = linvid::layer_norm(x.value(), gv, bv, eps);
  std::vector<Var> parents{x};
  if (gamma) parents.push_back(*gamma);
  if (beta) parents.push_back(*beta);
  const bool has_gamma = gamma != nullptr;
  const bool has_beta = beta != nullptr;
  Var gcopy = gamma ? *gamma : Var{};
  return Tape::record(std::move(out), parents,
                      [x, gcopy, has_gamma, has_beta, eps](const Tensor& g, const std::vector<bool>& needs) {
                        const Tensor& xv = x.value();
                        const std::size_t d = xv.shape().back();
                        const std::size_t rows = xv.size() / d;
                        Tensor dx(xv.shape());
                        Tensor dgamma({d});
                        Tensor dbeta({d});
                        std::vector<double> xhat(d), gh(d);
                        for (std::size_t r = 0; r < rows; ++r) {
                          const double* row = xv.data().data() + r * d;
                          const double* grow = g.data().data() + r * d;
                          double mu = 0.0;
                          for (std::size_t c = 0; c < d; ++c) mu += row[c];
                          mu /= static_cast<double>(d);
                          double var = 0.0;
                          for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
                          var /= static_cast<double>(d);
                          const double inv = 1.0 / std::sqrt(var + eps);
                          double mean_gh = 0.0, mean_gh_xhat = 0.0;
                          for (std::size_t c = 0; c < d; ++c) {
                            xhat[c] = (row[c] - mu) * inv;
                            gh[c] = has_gamma ? grow[c] * gcopy.value()[c] : grow[c];
                            dgamma[c] += grow[c] * xhat[c];
                            dbeta[c] += grow[c];
                            mean_gh += gh[c];
                            mean_gh_xhat += gh[c] * xhat[c];
                          }
                          mean_gh /= static_cast<double>(d);
                          mean_gh_xhat /= static_cast<double>(d);
                          for (std::size_t c = 0; c < d; ++c) {
                            dx[r * d + c] = inv * (gh[c] - mean_gh - xhat[c] * mean_gh_xhat);
                          }
                        }
                        std::vector<Tensor> r;
                        r.push_back(std::move(dx));
                        if (has_gamma) r.push_back(std::move(dgamma));
                        if (has_beta) r.push_back(std::move(dbeta));
                        (void)needs;
                        return r;
                      });
}

Var softmax(const Var& x) {
  Tensor out = linvid::softmax(x.value());
  auto y = std::make_shared<const Tensor>(out);
  return Tape::record(std::move(out), {x}, [y](const Tensor& g, const std::vector<bool>&) {
    const std::size_t d = y->shape().back();
    Tensor r(g.shape());
    for (std::size_t row = 0; row < g.size() / d; ++row) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += g[row * d + c] * (*y)[row * d + c];
      for (std::size_t c = 0; c < d; ++c) r[row * d + c] = (*y)[row * d + c] * (g[row * d + c] - dot);
    }
    return std::vector<Tensor>{std::move(r)};
  });
}

Var sum(const Var& x) {
  Shape shape = x.shape();
  return Tape::record(Tensor::scalar(linvid::sum(x.value())), {x}, [shape](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{Tensor::full(shape, g.item())};
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mse(const Var& a, const Var& b) {
  Var diff = sub(a, b);
  return mean(mul(diff, diff));
}

Var reshape(const Var& x, Shape shape) {
  Shape original = x.shape();
  return Tape::record(x.value().reshape(std::move(shape)), {x}, [original](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g.reshape(original)};
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  Shape shape = x.shape();
  return Tape::record(linvid::slice_rows(x.value(), begin, end), {x},
                      [shape, begin](const Tensor& g, const std::vector<bool>&) {
                        Tensor r(shape);
                        const std::size_t row = shape[0] ? r.size() / shape[0] : 0;
                        std::copy(g.data().begin(), g.data().end(), r.data().begin() + static_cast<std::ptrdiff_t>(begin * row));
                        return std::vector<Tensor>{std::move(r)};
                      });
}

Var concat_rows(const Var& a, const Var& b) {
  const std::size_t split = a.shape()[0];
  const std::size_t total = split + b.shape()[0];
  return Tape::record(linvid::concat_rows(a.value(), b.value()), {a, b},
                      [split, total](const Tensor& g, const std::vector<bool>&) {
                        return std::vector<Tensor>{linvid::slice_rows(g, 0, split), linvid::slice_rows(g, split, total)};
                      });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  Shape shape = x.shape();
  return Tape::record(linvid::slice_cols(x.value(), begin, end), {x},
                      [shape, begin, end](const Tensor& g, const std::vector<bool>&) {
                        Tensor r(shape);
                        const std::size_t w = end - begin;
                        for (std::size_t row = 0; row < shape[0]; ++row) {
                          for (std::size_t c = 0; c < w; ++c) r[row * shape[1] + begin + c] = g[row * w + c];
                        }
                        return std::vector<Tensor>{std::move(r)};
                      });
}

Var repeat_rows(const Var& x, std::size_t times) {
  Shape shape = x.shape();
  return Tape::record(linvid::repeat_rows(x.value(), times), {x}, [shape, times](const Tensor& g, const std::vector<bool>&) {
    Tensor r(shape);
    const std::size_t cols = shape[1];
    for (std::size_t row = 0; row < shape[0]; ++row) {
      for (std::size_t k = 0; k < times; ++k) {
        for (std::size_t c = 0; c < cols; ++c) r[row * cols + c] += g[(row * times + k) * cols + c];
      }
    }
    return std::vector<Tensor>{std::move(r)};
  });
}

Var conv1d_temporal(const Var& x, const Var& weight, const Var& bias, FlopCounter* flops) {
  Tensor out = linvid::conv1d_temporal(x.value(), weight.value(), bias.value(), flops);
  return Tape::record(std::move(out), {x, weight, bias}, [x, weight](const Tensor& g, const std::vector<bool>&) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const std::size_t frames = xv.dim(0), spatial = xv.dim(1), d = xv.dim(2);
    const std::size_t fs = spatial * d;
    Tensor dx(xv.shape()), dw(wv.shape()), db({d});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t s = 0; s < spatial; ++s) {
        const double* grow = g.data().data() + t * fs + s * d;
        for (std::size_t j = 0; j < d; ++j) db[j] += grow[j];
        for (std::size_t k = 0; k < kTemporalKernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - 1;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
          const std::size_t xo = static_cast<std::size_t>(src) * fs + s * d;
          for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            const double* w = wv.data().data() + k * d * d + i * d;
            double* dwr = dw.data().data() + k * d * d + i * d;
            const double xi = xv[xo + i];
            for (std::size_t j = 0; j < d; ++j) {
              acc += w[j] * grow[j];
              dwr[j] += xi * grow[j];
            }
            dx[xo + i] += acc;
          }
        }
      }
    }
    return std::vector<Tensor>{std::move(dx), std::move(dw), std::move(db)};
  });
}

Var multihead_softmax_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, double scale,
                                FlopCounter* flops) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2 || kv.shape() != vv.shape() || qv.dim(1) != kv.dim(1) ||
      heads == 0 || qv.dim(1) % heads != 0) {
    throw ShapeError("multihead_softmax_attention: q " + shape_str(qv.shape()) + ", k " + shape_str(kv.shape()) +
                     ", v " + shape_str(vv.shape()) + ", heads " + std::to_string(heads));
  }
  const std::size_t n = qv.dim(0), m = kv.dim(0), width = qv.dim(1), d = width / heads;
  // probs[h, i, j]
  auto probs = std::make_shared<Tensor>(Shape{heads, n, m});
  Tensor out({n, width});
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      double* p = probs->data().data() + (h * n + i) * m;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += qv[i * width + h * d + c] * kv[j * width + h * d + c];
        p[j] = dot * scale;
        mx = std::max(mx, p[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        p[j] = std::exp(p[j] - mx);
        total += p[j];
      }
      for (std::size_t j = 0; j < m; ++j) {
        p[j] /= total;
        for (std::size_t c = 0; c < d; ++c) out[i * width + h * d + c] += p[j] * vv[j * width + h * d + c];
      }
    }
  }
  count_flops(flops, heads * n * m * (2 * kFlopsPerMac * d + kFlopsPerExp + 3));
  std::shared_ptr<const Tensor> pc = probs;
  return Tape::record(std::move(out), {q, k, v}, [q, k, v, pc, heads, scale](const Tensor& g, const std::vector<bool>&) {
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    const std::size_t n = qv.dim(0), m = kv.dim(0), width = qv.dim(1), d = width / heads;
    Tensor dq(qv.shape()), dk(kv.shape()), dv(vv.shape());
    std::vector<double> dp(m);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = pc->data().data() + (h * n + i) * m;
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            acc += g[i * width + h * d + c] * vv[j * width + h * d + c];
            dv[j * width + h * d + c] += p[j] * g[i * width + h * d + c];
          }
          dp[j] = acc;
          dot += acc * p[j];
        }
        for (std::size_t j = 0; j < m; ++j) {
          const double ds = p[j] * (dp[j] - dot) * scale;
          for (std::size_t c = 0; c < d; ++c) {
            dq[i * width + h * d + c] += ds * kv[j * width + h * d + c];
            dk[j * width + h * d + c] += ds * qv[i * width + h * d + c];
          }
        }
      }
    }
    return std::vector<Tensor>{std::move(dq), std::move(dk), std::move(dv)};
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias, FlopCounter* flops) {
  return add(matmul(x, weight, flops), bias);
}

}  // namespace ag

}  // namespace linvid
