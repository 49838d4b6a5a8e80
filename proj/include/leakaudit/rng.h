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

#ifndef LEAKAUDIT_RNG_H_
#define LEAKAUDIT_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace leakaudit {

using Rng = std::mt19937_64;

// Returns an engine for the substream `name` (and optional `index`) of a run
// seed. Distinct names give statistically independent streams; the mapping is
// fixed so results are reproducible across runs and platforms.
Rng MakeStream(uint64_t seed, std::string_view name, uint64_t index = 0);

// A single 64-bit seed drawn from substream (name, index); used to hand out
// per-item seeds such as objective masks.
uint64_t DeriveSeed(uint64_t seed, std::string_view name, uint64_t index = 0);

// 64-bit FNV-1a.
uint64_t HashName(std::string_view name);

}  // namespace leakaudit

#endif  // LEAKAUDIT_RNG_H_
