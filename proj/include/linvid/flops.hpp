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

namespace linvid {

// FLOP accounting convention: one multiply-add is 2 FLOPs, one exp() is 4.
// Plain adds, compares and divides are 1 each. Only ratios and slopes are
// consumed downstream, so the constants just need to be applied uniformly.
inline constexpr std::uint64_t kFlopsPerMac = 2;
inline constexpr std::uint64_t kFlopsPerExp = 4;

/// Instrumented FLOP counter threaded explicitly through kernels.
struct FlopCounter {
  std::uint64_t flops = 0;
};

inline void count_flops(FlopCounter* counter, std::uint64_t n) {
  if (counter != nullptr) counter->flops += n;
}

}  // namespace linvid
