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

#include <cstdint>
#include <string>
#include <vector>

namespace linvid::bench {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double error = 0.0;
  double tolerance = 0.0;
};

struct OracleCheckOptions {
  std::uint64_t seed = 0;
  /// Perturbs the streamed state_sum by 1e-3 after the first block.
  bool corrupt_cache = false;
};

/// attention, cache, conv, sched, engine.
const std::vector<std::string>& oracle_suites();

/// Runs one suite or "all". Throws std::invalid_argument for unknown names.
std::vector<CheckResult> oracle_check(const std::string& suite, const OracleCheckOptions& options = {});

/// "check suite=<s> name=<n> status=pass|fail error=<e> tolerance=<t>".
std::string format_check(const CheckResult& r);

}  // namespace linvid::bench
