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

#include "linvid/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "binary_io.hpp"

namespace linvid {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'D', 'P'};
constexpr std::uint64_t kVersion = 1;
constexpr std::uint64_t kMaxName = 256;
constexpr std::uint64_t kMaxRank = 8;

using detail::get_u64;
using detail::put_u64;

}  // namespace

void save_params(const DiTParams& params, std::ostream& out) {
  out.write(kMagic, 4);
  put_u64(out, kVersion);
  std::uint64_t count = 0;
  visit_params(params, [&](const std::string&, const Tensor&) { ++count; });
  put_u64(out, count);
  visit_params(params, [&](const std::string& name, const Tensor& t) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    detail::put_doubles(out, t);
  });
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

DiTParams load_params(const ModelConfig& cfg, std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw std::runtime_error("not a linvid checkpoint");
  if (const auto v = get_u64(in, "checkpoint"); v != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v));
  }
  DiTParams params = init_params(cfg, 0);
  std::uint64_t expected = 0;
  visit_params(params, [&](const std::string&, const Tensor&) { ++expected; });
  if (const auto n = get_u64(in, "checkpoint"); n != expected) {
    throw std::runtime_error("checkpoint has " + std::to_string(n) + " sections, config needs " +
                             std::to_string(expected));
  }
  visit_params(params, [&](const std::string& name, Tensor& t) {
    const std::uint64_t len = get_u64(in, "checkpoint");
    if (len > kMaxName) throw std::runtime_error("checkpoint section name too long");
    std::string got(len, '\0');
    in.read(got.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint truncated");
    if (got != name) throw std::runtime_error("checkpoint section '" + got + "' where '" + name + "' was expected");
    const std::uint64_t rank = get_u64(in, "checkpoint");
    if (rank > kMaxRank) throw std::runtime_error("checkpoint section " + name + " has bad rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in, "checkpoint");
    if (shape != t.shape()) {
      throw ShapeError("checkpoint section " + name + " has shape " + shape_str(shape) + ", config needs " +
                       shape_str(t.shape()));
    }
    detail::get_doubles(in, t, "checkpoint");
  });
  return params;
}

void save_params_file(const DiTParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_params(params, out);
}

DiTParams load_params_file(const ModelConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_params(cfg, in);
}

namespace {

const char* conv_mode_name(ConvCacheMode m) {
  return m == ConvCacheMode::kTwoFrameCausal ? "two_frame_causal" : "one_frame_block_centered";
}

}  // namespace

ModelConfig config_from_json(const std::string& text) {
  using nlohmann::json;
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "in_channels") c.in_channels = value.get<std::size_t>();
    else if (key == "width") c.width = value.get<std::size_t>();
    else if (key == "depth") c.depth = value.get<std::size_t>();
    else if (key == "heads") c.heads = value.get<std::size_t>();
    else if (key == "ffn_dim") c.ffn_dim = value.get<std::size_t>();
    else if (key == "frames_per_block") c.frames_per_block = value.get<std::size_t>();
    else if (key == "grid_h") c.grid_h = value.get<std::size_t>();
    else if (key == "grid_w") c.grid_w = value.get<std::size_t>();
    else if (key == "cond_dim") c.cond_dim = value.get<std::size_t>();
    else if (key == "freq_dim") c.freq_dim = value.get<std::size_t>();
    else if (key == "attention_eps") c.attention_eps = value.get<double>();
    else if (key == "norm_eps") c.norm_eps = value.get<double>();
    else if (key == "rope") {
      const auto dims = value.at("dims").get<std::vector<std::size_t>>();
      if (dims.size() != 3) throw std::invalid_argument("rope.dims needs three entries");
      c.rope = {dims[0], dims[1], dims[2], value.value("base", 10000.0)};
    } else if (key == "conv_mode") {
      const auto name = value.get<std::string>();
      if (name == "two_frame_causal") c.conv_mode = ConvCacheMode::kTwoFrameCausal;
      else if (name == "one_frame_block_centered") c.conv_mode = ConvCacheMode::kOneFrameBlockCentered;
      else throw std::invalid_argument("unknown conv_mode " + name);
    } else {
      throw std::invalid_argument("unknown config key " + key);
    }
  }
  c.validate();
  return c;
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["in_channels"] = c.in_channels;
  j["width"] = c.width;
  j["depth"] = c.depth;
  j["heads"] = c.heads;
  j["ffn_dim"] = c.ffn_dim;
  j["frames_per_block"] = c.frames_per_block;
  j["grid_h"] = c.grid_h;
  j["grid_w"] = c.grid_w;
  j["cond_dim"] = c.cond_dim;
  j["freq_dim"] = c.freq_dim;
  j["attention_eps"] = c.attention_eps;
  j["norm_eps"] = c.norm_eps;
  j["rope"] = {{"dims", {c.rope.dim_t, c.rope.dim_h, c.rope.dim_w}}, {"base", c.rope.base}};
  j["conv_mode"] = conv_mode_name(c.conv_mode);
  return j.dump(2);
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace linvid
