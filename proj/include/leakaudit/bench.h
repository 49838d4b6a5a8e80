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

// Seeded benchmark: runs the whole pipeline once per seed and checks the
// qualitative leakage trends on seed-averaged values.

#ifndef LEAKAUDIT_BENCH_H_
#define LEAKAUDIT_BENCH_H_

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "leakaudit/config.h"
#include "leakaudit/pipeline.h"
#include "leakaudit/report.h"

namespace leakaudit {

struct TrendCheck {
  std::string id;  // "a" .. "g"
  std::string description;
  bool passed = false;
  std::string detail;
};

// (seed, cell id) pairs whose training diverged.
using DivergedCells = std::set<std::pair<uint64_t, std::string>>;

// Evaluates the trend assertions on a multi-seed report. Values are averaged
// over the non-DP model variants within a seed, then over seeds, except where
// a check compares variants or noise levels directly.
std::vector<TrendCheck> EvaluateTrends(const ExperimentConfig& config,
                                       const LeakageReport& report,
                                       std::span<const CellRarity> rarity,
                                       const DivergedCells& diverged);

std::string FormatTrendSummary(std::span<const TrendCheck> checks);

struct BenchOptions {
  bool quick = false;  // quick seeds only, no assertions
  int jobs = 1;
  std::ostream* progress = nullptr;
};

struct BenchResult {
  LeakageReport report;
  std::vector<CellRarity> rarity;
  DivergedCells diverged;
  bool assertions_run = false;
  std::vector<TrendCheck> checks;
  double seconds = 0.0;

  bool AllPassed() const;
};

// Writes seed_<s>/ workspaces plus the merged report.csv, report.json,
// rarity.csv, rarity.json, budget.json and trends.json under `out_dir`.
absl::StatusOr<BenchResult> RunBench(const ExperimentConfig& config,
                                     const std::string& out_dir,
                                     const BenchOptions& options);

}  // namespace leakaudit

#endif  // LEAKAUDIT_BENCH_H_
