// Copyright 2026 The leakaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leakaudit/rng.h"

namespace leakaudit {

uint64_t HashName(std::string_view name) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng MakeStream(uint64_t seed, std::string_view name, uint64_t index) {
  const uint64_t h = HashName(name);
  std::seed_seq seq{
      static_cast<uint32_t>(seed),  static_cast<uint32_t>(seed >> 32),
      static_cast<uint32_t>(h),     static_cast<uint32_t>(h >> 32),
      static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  return Rng(seq);
}

uint64_t DeriveSeed(uint64_t seed, std::string_view name, uint64_t index) {
  Rng rng = MakeStream(seed, name, index);
  return rng();
}

}  // namespace leakaudit
