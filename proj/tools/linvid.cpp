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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linvid/bench.hpp"
#include "linvid/checkpoint.hpp"
#include "linvid/engine.hpp"
#include "linvid/model.hpp"
#include "linvid/oracle_check.hpp"
#include "linvid/training.hpp"

namespace {

using namespace linvid;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string precision = "f64";
  std::size_t threads = 1;
};

// Writes to --out when given, else stdout.
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw std::runtime_error("cannot open " + g.out + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed to write " + g.out);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(6);
  s << x;
  return s.str();
}

ModelConfig config_or_default(const std::string& path) {
  return path.empty() ? ModelConfig{} : load_config_file(path);
}

std::pair<std::size_t, std::size_t> parse_clip(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--clip expects A:B");
  return {std::stoull(s.substr(0, colon)), std::stoull(s.substr(colon + 1))};
}

int run_bench_scaling(const Globals& g, bench::ScalingOptions o, const std::vector<std::string>& variants) {
  o.seed = g.seed;
  o.threads = g.threads;
  o.precision = g.precision == "f32" ? bench::Precision::kF32 : bench::Precision::kF64;
  o.variants.clear();
  for (const auto& v : variants) o.variants.push_back(bench::parse_variant(v));
  const auto rows = bench::run_scaling(o);
  emit(g, bench::to_csv(rows));
  std::ostream& log = g.out.empty() ? std::cerr : std::cout;
  for (const auto& w : bench::summarize_wall_time(rows)) {
    log << bench::variant_name(w.variant) << " N=" << w.n << " repeats=" << w.repeats << " min_ns=" << w.min_ns
        << " median_ns=" << w.median_ns << '\n';
  }
  for (bench::Variant v : o.variants) {
    const std::size_t min_n = v == bench::Variant::kLocal ? 4 * o.window : 0;
    try {
      log << bench::variant_name(v) << " flops_slope=" << fmt(bench::fit_slope(rows, v, bench::Metric::kFlops, min_n))
          << " wall_slope=" << fmt(bench::fit_slope(rows, v, bench::Metric::kWallTime, min_n)) << '\n';
    } catch (const std::invalid_argument& e) {
      log << bench::variant_name(v) << " slope unavailable: " << e.what() << '\n';
    }
  }
  return 0;
}

int run_stability(const Globals& g, bench::StabilityOptions o) {
  o.seed = g.seed;
  const auto rep = bench::stability_demo(o);
  emit(g, rep.to_text());
  return rep.passed() ? 0 : 1;
}

int run_oracle_check(const Globals& g, const std::string& suite, bool corrupt) {
  const auto results = bench::oracle_check(suite, {g.seed, corrupt});
  std::ostringstream text;
  std::size_t failed = 0;
  for (const auto& r : results) {
    text << bench::format_check(r) << '\n';
    failed += !r.passed;
  }
  text << "summary suite=" << suite << " checks=" << results.size() << " failed=" << failed << '\n';
  emit(g, text.str());
  return failed == 0 ? 0 : 1;
}

struct GenArgs {
  std::string config, params, i2v, clip, trace_out, latent_out;
  std::size_t blocks = 2, steps = 8, rollout = 0, cond_tokens = 4;
  bool hold_block = false;
};

int run_gen(const Globals& g, const GenArgs& a) {
  const ModelConfig cfg = config_or_default(a.config);
  const DiTParams params = a.params.empty() ? init_params(cfg, derive_seed(g.seed, 1)) : load_params_file(cfg, a.params);
  const LinearDiT model(cfg, params);
  Rng cond_rng(derive_seed(g.seed, 2));
  DiTDenoiser denoiser(model, gaussian({a.cond_tokens, cfg.cond_dim}, cond_rng));

  GenerationRequest req;
  req.blocks = a.blocks;
  req.schedule = RFSchedule::uniform(a.steps);
  req.seed = g.seed;
  if (!a.i2v.empty()) {
    Tensor frames = read_latent(a.i2v);
    if (frames.rank() == 3) frames = frames.reshape({1, frames.dim(0), frames.dim(1), frames.dim(2)});
    req.condition = std::move(frames);
    req.hold = a.hold_block ? I2VHold::kFirstBlock : I2VHold::kFirstFrame;
  }

  GenerationResult result;
  if (a.rollout > 0 || !a.clip.empty()) {
    const std::size_t length = a.rollout > 0 ? a.rollout : a.blocks;
    const auto [first, last] = a.clip.empty() ? std::pair<std::size_t, std::size_t>{1, length} : parse_clip(a.clip);
    result = rollout_and_clip(denoiser, length, first, last, req);
  } else {
    result = generate(denoiser, req);
  }
  if (!a.trace_out.empty()) write_text(a.trace_out, result.trace.to_csv());
  if (!a.latent_out.empty()) write_latent(result.video, a.latent_out);

  std::size_t min_bytes = SIZE_MAX, max_bytes = 0;
  for (const auto& r : result.trace.records) {
    if (r.block == 0) continue;
    min_bytes = std::min(min_bytes, r.cache_bytes);
    max_bytes = std::max(max_bytes, r.cache_bytes);
  }
  std::ostringstream text;
  text << "latent_shape=" << shape_str(result.video.shape()) << " commits=" << result.trace.commits()
       << " records=" << result.trace.records.size();
  if (max_bytes > 0) text << " cache_bytes_min=" << min_bytes << " cache_bytes_max=" << max_bytes;
  text << '\n';
  emit(g, text.str());
  return 0;
}

struct TrainArgs {
  std::string config, params_out;
  MemorizationOptions mem;
  bool fresh_noise = false;
};

int run_train(const Globals& g, TrainArgs a) {
  const ModelConfig cfg = config_or_default(a.config);
  a.mem.seed = g.seed;
  a.mem.fixed_sample = !a.fresh_noise;
  const MemorizationResult r = train_memorization(cfg, a.mem);
  std::ostringstream csv;
  csv.imbue(std::locale::classic());
  csv.precision(10);
  csv << "step,loss\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) csv << i << ',' << r.losses[i] << '\n';
  emit(g, csv.str());
  if (!a.params_out.empty()) save_params_file(r.params, a.params_out);
  std::ostream& log = g.out.empty() ? std::cerr : std::cout;
  if (!r.losses.empty()) {
    log << "initial_loss=" << fmt(r.losses.front()) << " final_loss=" << fmt(r.losses.back())
        << " reduction=" << fmt(r.losses.front() / r.losses.back()) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear video diffusion toolkit: benchmarks, oracle checks, generation and toy training"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file (default stdout)");
  app.add_option("--precision", g.precision, "Benchmark arithmetic")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Benchmark worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "Attention benchmarks");
  bench_cmd->require_subcommand(1);
  bench_cmd->fallthrough();
  auto* scaling = bench_cmd->add_subcommand("scaling", "Full / local / linear causal attention sweep, CSV output");
  bench::ScalingOptions so;
  std::vector<std::string> variants{"full", "local", "linear"};
  bool no_warmup = false;
  scaling->add_option("--variants", variants, "Variants to run")->delimiter(',')->capture_default_str();
  scaling->add_option("--ns", so.ns, "Ascending sequence lengths")->delimiter(',')->capture_default_str();
  scaling->add_option("--d", so.d, "Head dimension")->capture_default_str();
  scaling->add_option("--heads", so.heads, "Heads")->capture_default_str();
  scaling->add_option("--window", so.window, "Local attention window")->capture_default_str();
  scaling->add_option("--repeats", so.repeats, "Timed repeats per point")->capture_default_str();
  scaling->add_flag("--no-warmup", no_warmup, "Skip the discarded warmup run");

  auto* stability = bench_cmd->add_subcommand("stability", "Denominator stability with and without RoPE");
  bench::StabilityOptions sto;
  stability->add_option("--trials", sto.trials, "Random trials")->capture_default_str();
  stability->add_option("--min-magnitude", sto.min_magnitude, "Smallest q/k scale")->capture_default_str();
  stability->add_option("--max-magnitude", sto.max_magnitude, "Largest q/k scale")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle-check", "Compare kernels against reference implementations");
  std::string suite = "all";
  bool corrupt = false;
  oracle->add_option("--suite", suite, "attention, cache, conv, sched, engine or all")->capture_default_str();
  oracle->add_flag("--corrupt-cache", corrupt, "Perturb the streamed attention state (planted fault)");

  auto* gen = app.add_subcommand("gen", "Block-autoregressive generation");
  GenArgs ga;
  gen->add_option("--config", ga.config, "Model config JSON (default toy config)");
  gen->add_option("--params", ga.params, "Parameter checkpoint (default random init from --seed)");
  gen->add_option("--blocks", ga.blocks, "Blocks to generate")->capture_default_str();
  gen->add_option("--steps", ga.steps, "Denoising steps per block")->capture_default_str();
  gen->add_option("--i2v", ga.i2v, "Conditioning frame latent file");
  gen->add_flag("--hold-block", ga.hold_block, "The --i2v file holds a whole first block");
  gen->add_option("--rollout", ga.rollout, "Rollout length in blocks");
  gen->add_option("--clip", ga.clip, "Blocks A:B (1-based, inclusive) to keep from the rollout");
  gen->add_option("--cond-tokens", ga.cond_tokens, "Random conditioning tokens")->capture_default_str();
  gen->add_option("--trace-out", ga.trace_out, "Trace CSV");
  gen->add_option("--latent-out", ga.latent_out, "Latent output (u64 rank, u64 dims, float32 LE)");

  auto* train = app.add_subcommand("train-toy", "One-sample memorization with plain gradient descent");
  TrainArgs ta;
  train->add_option("--config", ta.config, "Model config JSON (default toy config)");
  train->add_option("--steps", ta.mem.steps, "Gradient steps")->capture_default_str();
  train->add_option("--lr", ta.mem.lr, "Learning rate")->capture_default_str();
  train->add_option("--frames", ta.mem.frames, "Frames in the training clip")->capture_default_str();
  train->add_flag("--fresh-noise", ta.fresh_noise, "Redraw noise and timesteps every step");
  train->add_option("--params-out", ta.params_out, "Write the trained checkpoint here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*bench_cmd) {
      if (*scaling) {
        so.warmup = !no_warmup;
        return run_bench_scaling(g, so, variants);
      }
      return run_stability(g, sto);
    }
    if (*oracle) return run_oracle_check(g, suite, corrupt);
    if (*gen) return run_gen(g, ga);
    if (*train) return run_train(g, ta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
