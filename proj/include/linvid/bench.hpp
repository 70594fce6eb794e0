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
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "linvid/rope.hpp"
#include "linvid/tensor.hpp"

namespace linvid::bench {

enum class Variant { kFull, kLocal, kLinear };
enum class Precision { kF32, kF64 };
enum class Metric { kFlops, kWallTime };

const char* variant_name(Variant v);
/// "full", "local" or "linear"; throws std::invalid_argument otherwise.
Variant parse_variant(const std::string& name);

struct BenchRow {
  Variant variant = Variant::kLinear;
  std::size_t n = 0;
  std::size_t d = 0;  // per head
  std::size_t heads = 0;
  std::size_t window = 0;  // local only, 0 elsewhere
  std::int64_t wall_time_ns = 0;
  std::uint64_t flops = 0;
  std::size_t peak_cache_bytes = 0;
  std::uint64_t seed = 0;
};

struct ScalingOptions {
  std::vector<Variant> variants{Variant::kFull, Variant::kLocal, Variant::kLinear};
  std::vector<std::size_t> ns{256, 512, 1024, 2048, 4096, 8192};
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t window = 256;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF64;
  std::size_t threads = 1;
  /// Run every point once untimed before the measured repeats.
  bool warmup = true;
};

/// Streams N tokens through one baseline and measures it.
BenchRow run_point(Variant variant, std::size_t n, std::size_t repeat, const ScalingOptions& options);

/// One row per (variant, N, repeat), in that nesting order. Points run on
/// `threads` workers; throws std::invalid_argument if ns is not ascending.
std::vector<BenchRow> run_scaling(const ScalingOptions& options);

/// Header line, then one line per row: variant,N,D,heads,W_window,
/// wall_time_ns,flops,peak_cache_bytes,seed.
std::string to_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> parse_csv(const std::string& text);

/// Least-squares slope of log y against log x. Throws std::invalid_argument
/// with fewer than 4 distinct x values or nonpositive data.
double fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

/// fit_loglog over the rows of `variant` with N >= min_n, using the median of
/// the metric over repeats at each N.
double fit_slope(const std::vector<BenchRow>& rows, Variant variant, Metric metric, std::size_t min_n = 0);

struct WallSummary {
  Variant variant;
  std::size_t n;
  std::size_t repeats;
  std::int64_t min_ns;
  std::int64_t median_ns;
};
std::vector<WallSummary> summarize_wall_time(const std::vector<BenchRow>& rows);

/// A frozen input on which rotating the denominator features drives a
/// denominator below zero. Found once by random search over 0.1-rounded
/// Gaussian entries.
struct AdversarialFixture {
  Tensor q, k, v;  // [6, 1, 16]
  TokenGrid grid;
  RopeConfig rope;
};
AdversarialFixture adversarial_fixture();

struct ModeStats {
  double min_denominator = std::numeric_limits<double>::infinity();
  std::size_t denominators = 0;
  std::size_t nonpositive = 0;
  std::size_t nonfinite_outputs = 0;
};

struct StabilityOptions {
  std::size_t trials = 100000;
  double min_magnitude = 1e-3;
  double max_magnitude = 1e3;
  std::uint64_t seed = 0;
};

struct StabilityReport {
  ModeStats rope_free;
  ModeStats rotated;
  double fixture_rope_free_min = 0.0;
  double fixture_rotated_min = 0.0;
  std::size_t trials = 0;

  /// RoPE-free mode clean over all trials and the fixture breaks the rotated mode.
  bool passed() const;
  std::string to_text() const;
};

/// Random grids (up to 4x3x3 tokens), one head of dim 16 with the toy RoPE
/// split, q and k scaled by a log-uniform magnitude per trial.
StabilityReport stability_demo(const StabilityOptions& options);

}  // namespace linvid::bench
