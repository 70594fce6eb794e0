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

#include "linvid/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "linvid/baselines.hpp"
#include "linvid/linear_attention.hpp"
#include "linvid/rng.hpp"

namespace linvid::bench {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kLocal: return "local";
    case Variant::kLinear: return "linear";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "local") return Variant::kLocal;
  if (name == "linear") return Variant::kLinear;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

namespace {

template <class T>
Seq<T> random_seq(std::size_t n, std::size_t heads, std::size_t d, Rng& rng) {
  Seq<T> s(n, heads, d);
  for (T& x : s.data) x = static_cast<T>(rng.gaussian());
  return s;
}

template <class T>
BenchRow measure(Variant variant, std::size_t n, std::uint64_t seed, const ScalingOptions& o) {
  Rng rng(seed);
  const Seq<T> q = random_seq<T>(n, o.heads, o.d, rng);
  const Seq<T> k = random_seq<T>(n, o.heads, o.d, rng);
  const Seq<T> v = random_seq<T>(n, o.heads, o.d, rng);
  BenchRow row{variant, n, o.d, o.heads, variant == Variant::kLocal ? o.window : 0, 0, 0, 0, seed};
  FlopCounter fc;
  const auto start = std::chrono::steady_clock::now();
  switch (variant) {
    case Variant::kFull: {
      FullKVCache<T> cache{o.heads, o.d, {}, {}};
      causal_full_attention(q, k, v, cache, &fc);
      row.peak_cache_bytes = cache.bytes();
      break;
    }
    case Variant::kLocal: {
      LocalKVCache<T> cache(o.heads, o.d, o.window);
      causal_local_attention(q, k, v, cache, &fc);
      row.peak_cache_bytes = cache.bytes();
      break;
    }
    case Variant::kLinear: {
      LinearState<T> state(o.heads, o.d);
      causal_linear_attention(q, k, v, state, static_cast<T>(1e-6), &fc);
      row.peak_cache_bytes = state.bytes();
      break;
    }
  }
  row.wall_time_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  row.flops = fc.flops;
  return row;
}

}  // namespace

BenchRow run_point(Variant variant, std::size_t n, std::size_t repeat, const ScalingOptions& o) {
  const std::uint64_t seed = derive_seed(o.seed, n, repeat);
  return o.precision == Precision::kF32 ? measure<float>(variant, n, seed, o) : measure<double>(variant, n, seed, o);
}

std::vector<BenchRow> run_scaling(const ScalingOptions& o) {
  if (o.ns.empty() || !std::is_sorted(o.ns.begin(), o.ns.end()) ||
      std::adjacent_find(o.ns.begin(), o.ns.end()) != o.ns.end()) {
    throw std::invalid_argument("N list must be nonempty and strictly ascending");
  }
  if (o.repeats == 0) throw std::invalid_argument("repeats must be at least 1");
  struct Job {
    Variant variant;
    std::size_t n;
  };
  std::vector<Job> jobs;
  for (Variant v : o.variants) {
    for (std::size_t n : o.ns) jobs.push_back({v, n});
  }
  std::vector<std::vector<BenchRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      try {
        if (o.warmup) run_point(jobs[j].variant, jobs[j].n, 0, o);
        for (std::size_t r = 0; r < o.repeats; ++r) results[j].push_back(run_point(jobs[j].variant, jobs[j].n, r, o));
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(o.threads, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<BenchRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

std::string to_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << "variant,N,D,heads,W_window,wall_time_ns,flops,peak_cache_bytes,seed\n";
  for (const BenchRow& r : rows) {
    out << variant_name(r.variant) << ',' << r.n << ',' << r.d << ',' << r.heads << ',' << r.window << ','
        << r.wall_time_ns << ',' << r.flops << ',' << r.peak_cache_bytes << ',' << r.seed << '\n';
  }
  return out.str();
}

std::vector<BenchRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string line;
  if (!std::getline(in, line) || line.rfind("variant,", 0) != 0) throw std::invalid_argument("missing CSV header");
  std::vector<BenchRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 9) throw std::invalid_argument("CSV line " + std::to_string(lineno) + " has " +
                                                   std::to_string(f.size()) + " fields, expected 9");
    try {
      rows.push_back({parse_variant(f[0]), std::stoull(f[1]), std::stoull(f[2]), std::stoull(f[3]), std::stoull(f[4]),
                      std::stoll(f[5]), std::stoull(f[6]), std::stoull(f[7]), std::stoull(f[8])});
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

double fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_loglog: x and y differ in length");
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw std::invalid_argument("slope fit needs at least 4 distinct N");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0 && ys[i] > 0)) throw std::invalid_argument("slope fit needs positive data");
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double fit_slope(const std::vector<BenchRow>& rows, Variant variant, Metric metric, std::size_t min_n) {
  std::map<std::size_t, std::vector<double>> by_n;
  for (const BenchRow& r : rows) {
    if (r.variant != variant || r.n < min_n) continue;
    by_n[r.n].push_back(metric == Metric::kFlops ? static_cast<double>(r.flops) : static_cast<double>(r.wall_time_ns));
  }
  std::vector<double> xs, ys;
  for (auto& [n, vals] : by_n) {
    xs.push_back(static_cast<double>(n));
    ys.push_back(median(vals));
  }
  return fit_loglog(xs, ys);
}

std::vector<WallSummary> summarize_wall_time(const std::vector<BenchRow>& rows) {
  std::map<std::pair<int, std::size_t>, std::vector<double>> groups;
  for (const BenchRow& r : rows) groups[{static_cast<int>(r.variant), r.n}].push_back(static_cast<double>(r.wall_time_ns));
  std::vector<WallSummary> out;
  for (auto& [key, vals] : groups) {
    out.push_back({static_cast<Variant>(key.first), key.second, vals.size(),
                   static_cast<std::int64_t>(*std::min_element(vals.begin(), vals.end())),
                   static_cast<std::int64_t>(median(vals))});
  }
  return out;
}

AdversarialFixture adversarial_fixture() {
  static const double q[] = {
      1.0,  0.7,  1.4,  0.1,  0.4,  -0.4, 1.7,  0.1,  -0.1, 0.7,  -1.0, 1.3,  -0.7, 0.6,  0.2,  1.3,
      0.6,  -0.2, -1.4, 0.2,  0.6,  -1.7, -1.7, -0.7, 1.9,  0.6,  0.9,  -1.3, 0.1,  -0.7, 1.4,  1.3,
      0.7,  1.7,  -0.7, -1.1, -1.4, -0.6, -0.1, -0.7, 0.2,  0.0,  1.4,  0.4,  -2.5, -0.9, 1.3,  -0.7,
      0.0,  -1.0, -0.5, 0.4,  -2.1, -1.0, 0.2,  -0.3, 0.3,  0.1,  -0.2, 0.0,  0.1,  0.8,  0.3,  -1.5,
      -0.1, 1.2,  -1.8, 0.0,  -0.6, -0.2, -1.8, -0.8, -0.3, -0.9, -0.4, -1.0, -0.4, -0.8, -0.6, -0.3,
      0.8,  -0.2, 0.1,  -0.2, 0.3,  1.0,  0.5,  0.7,  0.3,  -0.1, 1.2,  -0.1, 1.9,  1.7,  -1.6, 1.6};
  static const double k[] = {
      0.9,  1.0,  -0.9, -0.9, 0.3,  0.1,  -1.3, -1.1, -1.0, 1.6,  -0.7, -1.3, 0.9,  1.4,  -1.8, -1.8,
      -0.1, -0.4, 0.8,  1.2,  1.1,  -1.1, 0.3,  0.4,  0.8,  -1.0, 0.3,  -2.7, -0.3, -0.2, 0.1,  -0.8,
      0.5,  0.6,  -0.5, -0.3, 0.3,  -0.5, -0.4, 0.2,  -0.2, 1.2,  0.8,  0.0,  3.2,  -0.3, -0.8, -0.5,
      1.0,  -1.0, 0.7,  1.4,  -0.8, -1.9, -0.5, -2.4, 1.3,  -0.5, 0.5,  -3.0, 0.6,  -1.4, -1.1, 0.3,
      -0.4, 1.0,  1.8,  -1.1, 0.1,  0.6,  0.9,  0.7,  -0.3, -0.2, 2.3,  -0.2, -0.9, -0.9, 0.1,  0.9,
      0.1,  -0.8, 0.3,  1.2,  1.0,  -0.3, 0.7,  2.3,  -0.4, -0.6, -0.7, -0.2, 0.4,  -0.7, 0.6,  -1.1};
  const Shape shape{6, 1, 16};
  return {Tensor(shape, std::vector<double>(std::begin(q), std::end(q))),
          Tensor(shape, std::vector<double>(std::begin(k), std::end(k))), Tensor::full(shape, 1.0), TokenGrid{3, 1, 2},
          RopeConfig{4, 6, 6, 10000.0}};
}

namespace {

void accumulate(ModeStats& s, const Tensor& den, const Tensor& out) {
  for (double x : den.data()) {
    s.min_denominator = std::min(s.min_denominator, x);
    s.nonpositive += !(x > 0.0);
    ++s.denominators;
  }
  for (double x : out.data()) s.nonfinite_outputs += !std::isfinite(x);
}

double min_of(const Tensor& t) { return *std::min_element(t.data().begin(), t.data().end()); }

}  // namespace

StabilityReport stability_demo(const StabilityOptions& o) {
  if (!(o.min_magnitude > 0 && o.max_magnitude >= o.min_magnitude)) {
    throw std::invalid_argument("magnitude range must be positive and ordered");
  }
  const RopeConfig rope{4, 6, 6, 10000.0};
  const std::size_t hd = 16;
  StabilityReport rep;
  rep.trials = o.trials;
  Rng rng(o.seed);
  const double log_lo = std::log(o.min_magnitude), log_hi = std::log(o.max_magnitude);
  for (std::size_t trial = 0; trial < o.trials; ++trial) {
    const TokenGrid grid{1 + rng.below(4), 1 + rng.below(3), 1 + rng.below(3)};
    const std::size_t n = grid.tokens();
    const double mag = std::exp(rng.uniform(log_lo, log_hi));
    const Tensor q = gaussian({n, 1, hd}, rng, mag);
    const Tensor k = gaussian({n, 1, hd}, rng, mag);
    const Tensor v = gaussian({n, 1, hd}, rng);
    for (auto mode : {DenominatorMode::kRopeFree, DenominatorMode::kRotated}) {
      const Tensor den = linear_attention_denominators(q, k, grid, rope, kDefaultAttentionEps, mode);
      const Tensor out = linear_attention_forward(q, k, v, grid, rope, kDefaultAttentionEps, mode);
      accumulate(mode == DenominatorMode::kRopeFree ? rep.rope_free : rep.rotated, den, out);
    }
  }
  const AdversarialFixture f = adversarial_fixture();
  rep.fixture_rope_free_min = min_of(
      linear_attention_denominators(f.q, f.k, f.grid, f.rope, kDefaultAttentionEps, DenominatorMode::kRopeFree));
  rep.fixture_rotated_min = min_of(
      linear_attention_denominators(f.q, f.k, f.grid, f.rope, kDefaultAttentionEps, DenominatorMode::kRotated));
  return rep;
}

bool StabilityReport::passed() const {
  return rope_free.nonpositive == 0 && rope_free.nonfinite_outputs == 0 && fixture_rope_free_min > 0.0 &&
         fixture_rotated_min <= 0.0;
}

std::string StabilityReport::to_text() const {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(6);
  auto line = [&](const char* name, const ModeStats& s) {
    out << name << ": denominators=" << s.denominators << " min=" << s.min_denominator
        << " nonpositive=" << s.nonpositive << " nonfinite_outputs=" << s.nonfinite_outputs << '\n';
  };
  out << "trials=" << trials << '\n';
  line("rope_free", rope_free);
  line("rotated", rotated);
  out << "fixture: rope_free_min=" << fixture_rope_free_min << " rotated_min=" << fixture_rotated_min << '\n';
  out << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace linvid::bench
