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

#include <iosfwd>
#include <string>

#include "linvid/model.hpp"

namespace linvid {

/// Parameter checkpoint: magic "LVDP", u64 version, u64 section count, then
/// per section: u64 name length, name bytes, u64 rank, u64 dims, raw doubles.
/// All integers and doubles are little-endian.
void save_params(const DiTParams& params, std::ostream& out);

/// Reads a checkpoint written for `cfg`. Names, order and shapes must match.
DiTParams load_params(const ModelConfig& cfg, std::istream& in);

void save_params_file(const DiTParams& params, const std::string& path);
DiTParams load_params_file(const ModelConfig& cfg, const std::string& path);

/// ModelConfig as JSON. Missing keys keep their defaults; unknown keys throw.
ModelConfig config_from_json(const std::string& text);
std::string config_to_json(const ModelConfig& cfg);
ModelConfig load_config_file(const std::string& path);

}  // namespace linvid
