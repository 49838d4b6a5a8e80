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

// Experiment stages: corpus generation, grid training, attacks, accounting
// and reporting. Every stage reads and writes plain files so that each one can
// be rerun on its own.
//
// Layout under a workspace directory:
//   corpus/{corpus.jsonl, split.json, summary.json}
//   runs/<run_id>/grid.json
//   runs/<run_id>/<cell>/train_log.json
//   runs/<run_id>/<cell>/epoch_<k>/{checkpoint.json, checkpoint.bin}
//   runs/<run_id>/<cell>/epoch_<k>/attacks/seed_<s>/{threshold.json, *.json,
//                                                     features_*.csv}
//   runs/<run_id>/budget.json
//   runs/<run_id>/report/{report.csv, report.json, rarity.csv, rarity.json}

#ifndef LEAKAUDIT_PIPELINE_H_
#define LEAKAUDIT_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/attacks.h"
#include "leakaudit/config.h"
#include "leakaudit/corpus.h"
#include "leakaudit/report.h"
#include "leakaudit/trainer.h"

namespace leakaudit {

std::string CorpusDir(const std::string& workspace);
std::string RunDir(const std::string& workspace, const std::string& run_id);

// Table-1 style counts.
struct CorpusSummary {
  int patients = 0;
  int train_patients = 0;
  int test_patients = 0;
  int admissions = 0;
  int notes = 0;
  int64_t tokens = 0;
  int distinct_codes = 0;
};
nlohmann::json CorpusSummaryToJson(const CorpusSummary& summary);

CorpusSummary SummarizeCorpus(const Corpus& corpus, const CorpusSplit& split);

// Generates (or ingests) the corpus, splits it by patient and writes
// corpus.jsonl, split.json and summary.json into `corpus_dir`.
absl::StatusOr<CorpusSummary> GenCorpus(const ExperimentConfig& config,
                                        const std::string& corpus_dir);

// The corpus and split as stored by GenCorpus.
struct LoadedCorpus {
  Corpus corpus;
  CorpusSplit split;
};
absl::StatusOr<LoadedCorpus> LoadCorpusDir(const ExperimentConfig& config,
                                           const std::string& corpus_dir);

// Drops samples with fewer than `min_tokens` non-pad tokens.
std::vector<Sample> DropShortSamples(std::vector<Sample> samples,
                                     int min_tokens);

// One training run of the grid: a model variant with or without DP noise.
struct Cell {
  std::string id;
  int model_index = 0;
  std::string model_name;
  ModelConfig model;
  std::optional<double> sigma;  // nullopt = non-DP
  TrainConfig train;
};
std::vector<Cell> ExpandGrid(const ExperimentConfig& config);

// Member (training) and non-member samples of a cell. DP cells apply the
// per-patient cap, so their member set is a subset of the non-DP one.
struct CellSamples {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
CellSamples SamplesForCell(const ExperimentConfig& config,
                           const LoadedCorpus& corpus, const Cell& cell);

struct CellResult {
  Cell cell;
  TrainLog log;
};

// Trains every cell; `jobs` cells run concurrently. Divergence is recorded in
// the cell's log and grid.json without stopping the other cells.
absl::StatusOr<std::vector<CellResult>> TrainGrid(
    const ExperimentConfig& config, const std::string& corpus_dir,
    const std::string& run_dir, int jobs, std::ostream* progress = nullptr);

// Runs `attacks` with each of `seeds` against every checkpoint of the run.
// S-BBA's threshold is written once per checkpoint and seed; the group
// attacks read it back from that file.
absl::Status AttackRun(const ExperimentConfig& config,
                       const std::string& corpus_dir,
                       const std::string& run_dir,
                       const std::vector<AttackKind>& attacks,
                       const std::vector<uint64_t>& seeds, int jobs,
                       std::ostream* progress = nullptr);

// Accountant rows for the final epoch of every DP cell; writes budget.json.
absl::StatusOr<std::vector<AccountantRow>> AccountRun(
    const ExperimentConfig& config, const std::string& run_dir);

// Rarity analysis of one non-DP checkpoint.
struct CellRarity {
  std::string cell;
  std::string objective;
  int epoch = 0;
  uint64_t seed = 0;
  RarityAnalysis analysis;
};

nlohmann::json CellRarityToJson(const CellRarity& rarity);

struct RunReport {
  LeakageReport report;
  std::vector<CellRarity> rarity;
};

// Collects outcomes, losses and budgets into report.csv/report.json and the
// rarity files under `out_dir`. Fails naming the first missing checkpoint or
// outcome file.
absl::StatusOr<RunReport> ReportRun(const ExperimentConfig& config,
                                    const std::string& corpus_dir,
                                    const std::string& run_dir,
                                    const std::string& out_dir);

}  // namespace leakaudit

#endif  // LEAKAUDIT_PIPELINE_H_
