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

#include "linvid/linear_attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "linvid/ops.hpp"

namespace linvid {

namespace {

struct Dims {
  std::size_t n, heads, d;
};

Dims check_inputs(const Tensor& num_q, const Tensor& num_k, const Tensor& v, const Tensor& den_q,
                  const Tensor& den_k, std::size_t block_tokens, double eps, const AttentionPrefix* prefix) {
  if (num_q.rank() != 3) throw ShapeError("linear attention expects [N, heads, d], got " + shape_str(num_q.shape()));
  const Shape& s = num_q.shape();
  for (const Tensor* t : {&num_k, &v, &den_q, &den_k}) {
    if (t->shape() != s) {
      throw ShapeError("linear attention operands disagree: " + shape_str(s) + " vs " + shape_str(t->shape()));
    }
  }
  if (!(eps > 0.0)) throw std::invalid_argument("linear attention eps must be positive");
  if (block_tokens == 0) throw std::invalid_argument("block_tokens must be positive");
  const Dims dims{s[0], s[1], s[2]};
  if (prefix) {
    if (prefix->state_sum.shape() != Shape{dims.heads, dims.d, dims.d} ||
        prefix->key_sum.shape() != Shape{dims.heads, dims.d}) {
      throw ShapeError("attention prefix shapes " + shape_str(prefix->state_sum.shape()) + "/" +
                       shape_str(prefix->key_sum.shape()) + " do not match inputs " + shape_str(s));
    }
  }
  return dims;
}

// Forward pass; when `block_states` is given it receives S_b and z_b for
// every segment (used by the backward pass).
BlockAttentionResult forward_impl(const Tensor& num_q, const Tensor& num_k, const Tensor& v, const Tensor& den_q,
                                  const Tensor& den_k, std::size_t block_tokens, double eps,
                                  const AttentionPrefix* prefix, FlopCounter* flops,
                                  std::vector<AttentionPrefix>* block_states) {
  const Dims dims = check_inputs(num_q, num_k, v, den_q, den_k, block_tokens, eps, prefix);
  const std::size_t n = dims.n, heads = dims.heads, d = dims.d;
  BlockAttentionResult r{Tensor({n, heads, d}), Tensor({n, heads}),
                         prefix ? *prefix : AttentionPrefix::zeros(heads, d)};
  Tensor& state = r.totals.state_sum;
  Tensor& keys = r.totals.key_sum;
  const std::size_t blocks = (n + block_tokens - 1) / block_tokens;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * block_tokens;
    const std::size_t hi = std::min(n, lo + block_tokens);
    // Fold this segment into the running state, token-ascending.
    for (std::size_t j = lo; j < hi; ++j) {
      for (std::size_t h = 0; h < heads; ++h) {
        const double* kr = num_k.data().data() + (j * heads + h) * d;
        const double* kd = den_k.data().data() + (j * heads + h) * d;
        const double* vr = v.data().data() + (j * heads + h) * d;
        double* st = state.data().data() + h * d * d;
        double* ks = keys.data().data() + h * d;
        for (std::size_t a = 0; a < d; ++a) {
          const double ka = kr[a];
          for (std::size_t e = 0; e < d; ++e) st[a * d + e] += ka * vr[e];
          ks[a] += kd[a];
        }
      }
    }
    if (block_states) block_states->push_back(r.totals);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        const double* qr = num_q.data().data() + (i * heads + h) * d;
        const double* qd = den_q.data().data() + (i * heads + h) * d;
        const double* st = state.data().data() + h * d * d;
        const double* ks = keys.data().data() + h * d;
        double* o = r.out.data().data() + (i * heads + h) * d;
        double den = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          den += qd[a] * ks[a];
          const double qa = qr[a];
          for (std::size_t e = 0; e < d; ++e) o[e] += qa * st[a * d + e];
        }
        den += eps;
        r.denominators[i * heads + h] = den;
        for (std::size_t e = 0; e < d; ++e) o[e] /= den;
      }
    }
    const std::size_t m = hi - lo;
    // state + key accumulation, numerator, denominator dot + eps, divide.
    count_flops(flops, heads * m * (kFlopsPerMac * d * d + d + kFlopsPerMac * d * d + kFlopsPerMac * d + 1 + d));
  }
  return r;
}

}  // namespace

BlockAttentionResult block_linear_attention(const Tensor& num_q, const Tensor& num_k, const Tensor& v,
                                            const Tensor& den_q, const Tensor& den_k, std::size_t block_tokens,
                                            double eps, const AttentionPrefix* prefix, FlopCounter* flops) {
  return forward_impl(num_q, num_k, v, den_q, den_k, block_tokens, eps, prefix, flops, nullptr);
}

namespace {

BlockAttentionResult full_sequence(const Tensor& q, const Tensor& k, const Tensor& v, const TokenGrid& grid,
                                   const RopeConfig& cfg, double eps, DenominatorMode mode) {
  const Tensor fq = relu(q);
  const Tensor fk = relu(k);
  const Tensor rq = rope_rotate(fq, grid, cfg);
  const Tensor rk = rope_rotate(fk, grid, cfg);
  const bool rotated = mode == DenominatorMode::kRotated;
  const std::size_t n = q.rank() == 3 ? q.dim(0) : 0;
  return block_linear_attention(rq, rk, v, rotated ? rq : fq, rotated ? rk : fk, std::max<std::size_t>(n, 1), eps);
}

}  // namespace

Tensor linear_attention_forward(const Tensor& q, const Tensor& k, const Tensor& v, const TokenGrid& grid,
                                const RopeConfig& cfg, double eps, DenominatorMode mode) {
  return full_sequence(q, k, v, grid, cfg, eps, mode).out;
}

Tensor linear_attention_denominators(const Tensor& q, const Tensor& k, const TokenGrid& grid, const RopeConfig& cfg,
                                     double eps, DenominatorMode mode) {
  return full_sequence(q, k, Tensor(q.shape()), grid, cfg, eps, mode).denominators;
}

Tensor effective_attention_map(const Tensor& q, const Tensor& k, const TokenGrid& grid, const RopeConfig& cfg,
                               double eps) {
  if (q.rank() != 3 || q.shape() != k.shape()) {
    throw ShapeError("effective_attention_map expects matching [N, heads, d], got " + shape_str(q.shape()) + " and " +
                     shape_str(k.shape()));
  }
  const std::size_t n = q.dim(0), heads = q.dim(1), d = q.dim(2);
  const Tensor den = linear_attention_denominators(q, k, grid, cfg, eps);
  const Tensor rq = rope_rotate(relu(q), grid, cfg);
  const Tensor rk = rope_rotate(relu(k), grid, cfg);
  Tensor map({heads, n, n});
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* qi = rq.data().data() + (i * heads + h) * d;
      const double den_i = den[i * heads + h];
      for (std::size_t j = 0; j < n; ++j) {
        const double* kj = rk.data().data() + (j * heads + h) * d;
        double dot = 0.0;
        for (std::size_t a = 0; a < d; ++a) dot += qi[a] * kj[a];
        map[(h * n + i) * n + j] = dot / den_i;
      }
    }
  }
  return map;
}

double locality_metric(const Tensor& attention, const TokenGrid& grid) {
  if (attention.rank() != 2 || attention.dim(0) != attention.dim(1) || attention.dim(0) != grid.tokens()) {
    throw ShapeError("locality_metric expects [N, N] matching the grid, got " + shape_str(attention.shape()));
  }
  const std::size_t n = attention.dim(0);
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double mass = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = std::abs(attention[i * n + j]);
      mass += w;
      weighted += w * static_cast<double>(grid.manhattan(i, j));
    }
    if (mass == 0.0) continue;
    total += weighted / mass;
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("locality_metric: every attention row is zero");
  return total / static_cast<double>(rows);
}

Tensor softmax_attention_reference(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  if (q.rank() != 3 || k.rank() != 3 || k.shape() != v.shape() || q.dim(1) != k.dim(1) || q.dim(2) != k.dim(2)) {
    throw ShapeError("softmax_attention_reference: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                     ", v " + shape_str(v.shape()));
  }
  const std::size_t n = q.dim(0), m = k.dim(0), heads = q.dim(1), d = q.dim(2);
  Tensor out({n, heads, d});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor scores({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t a = 0; a < d; ++a) dot += q[(i * heads + h) * d + a] * k[(j * heads + h) * d + a];
        scores[i * m + j] = dot * scale;
      }
    }
    const Tensor probs = softmax(scores);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double p = probs[i * m + j];
        for (std::size_t a = 0; a < d; ++a) out[(i * heads + h) * d + a] += p * v[(j * heads + h) * d + a];
      }
    }
  }
  return out;
}

namespace ag {

Var block_linear_attention(const Var& num_q, const Var& num_k, const Var& v, const Var& den_q, const Var& den_k,
                           std::size_t block_tokens, double eps, const AttentionPrefix* prefix, FlopCounter* flops,
                           AttentionPrefix* totals) {
  auto states = std::make_shared<std::vector<AttentionPrefix>>();
  BlockAttentionResult r = forward_impl(num_q.value(), num_k.value(), v.value(), den_q.value(), den_k.value(),
                                        block_tokens, eps, prefix, flops, states.get());
  auto out = std::make_shared<const Tensor>(r.out);
  auto den = std::make_shared<const Tensor>(std::move(r.denominators));
  if (totals) *totals = std::move(r.totals);
  return Tape::record(
      std::move(r.out), {num_q, num_k, v, den_q, den_k},
      [num_q, num_k, v, den_q, states, out, den, block_tokens](const Tensor& g, const std::vector<bool>&) {
        const Tensor& qr = num_q.value();
        const Tensor& kr = num_k.value();
        const Tensor& vv = v.value();
        const Tensor& qd = den_q.value();
        const std::size_t n = qr.dim(0), heads = qr.dim(1), d = qr.dim(2);
        const std::size_t blocks = states->size();
        Tensor dqr(qr.shape()), dkr(qr.shape()), dv(qr.shape()), dqd(qr.shape()), dkd(qr.shape());
        // Running suffix sums of dS_b and dz_b, walked from the last segment back.
        Tensor suffix_s({heads, d, d});
        Tensor suffix_z({heads, d});
        std::vector<double> dnum(d);
        for (std::size_t bb = blocks; bb-- > 0;) {
          const std::size_t lo = bb * block_tokens;
          const std::size_t hi = std::min(n, lo + block_tokens);
          const AttentionPrefix& st = (*states)[bb];
          for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t h = 0; h < heads; ++h) {
              const std::size_t row = (i * heads + h) * d;
              const double dn = (*den)[i * heads + h];
              double go = 0.0;
              for (std::size_t e = 0; e < d; ++e) {
                dnum[e] = g[row + e] / dn;
                go += g[row + e] * (*out)[row + e];
              }
              const double dden = -go / dn;
              const double* s = st.state_sum.data().data() + h * d * d;
              const double* z = st.key_sum.data().data() + h * d;
              double* ss = suffix_s.data().data() + h * d * d;
              double* sz = suffix_z.data().data() + h * d;
              for (std::size_t a = 0; a < d; ++a) {
                double acc = 0.0;
                const double qa = qr[row + a];
                for (std::size_t e = 0; e < d; ++e) {
                  acc += s[a * d + e] * dnum[e];
                  ss[a * d + e] += qa * dnum[e];
                }
                dqr[row + a] = acc;
                dqd[row + a] = dden * z[a];
                sz[a] += dden * qd[row + a];
              }
            }
          }
          for (std::size_t j = lo; j < hi; ++j) {
            for (std::size_t h = 0; h < heads; ++h) {
              const std::size_t row = (j * heads + h) * d;
              const double* ss = suffix_s.data().data() + h * d * d;
              const double* sz = suffix_z.data().data() + h * d;
              for (std::size_t a = 0; a < d; ++a) {
                double acc = 0.0;
                const double ka = kr[row + a];
                for (std::size_t e = 0; e < d; ++e) {
                  acc += ss[a * d + e] * vv[row + e];
                  dv[row + e] += ka * ss[a * d + e];
                }
                dkr[row + a] = acc;
                dkd[row + a] = sz[a];
              }
            }
          }
        }
        return std::vector<Tensor>{std::move(dqr), std::move(dkr), std::move(dv), std::move(dqd), std::move(dkd)};
      });
}

}  // namespace ag

}  // namespace linvid
