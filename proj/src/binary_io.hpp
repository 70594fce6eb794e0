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

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "linvid/tensor.hpp"

namespace linvid::detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  std::array<unsigned char, 8> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw std::runtime_error(std::string(what) + " truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

inline void put_doubles(std::ostream& out, const Tensor& t) {
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void get_doubles(std::istream& in, Tensor& t, const char* what) {
  for (double& v : t.data()) v = std::bit_cast<double>(get_u64(in, what));
}

}  // namespace linvid::detail
