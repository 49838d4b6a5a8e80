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

// Experiment configuration: one versioned JSON document describing the
// corpus, the model variants, the training grid, the attacks and the report.

#ifndef LEAKAUDIT_CONFIG_H_
#define LEAKAUDIT_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "leakaudit/attacks.h"
#include "leakaudit/corpus.h"
#include "leakaudit/model.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

inline constexpr int kConfigSchemaVersion = 1;

struct CorpusSection {
  // "synthetic" generates from `synthetic`; "jsonl" ingests `path`.
  std::string source = "synthetic";
  std::string path;
  CorpusConfig synthetic;
  double split_ratio = 0.7;
  // Samples with fewer real tokens are dropped on both sides.
  int min_tokens = 2;
};

struct ModelVariant {
  std::string name;
  // vocab_size is taken from the corpus section.
  ModelConfig config;
};

struct DpSweep {
  std::vector<double> sigmas;
  int epochs = 3;
  double learning_rate = 1e-2;
  int lot_size = 16;  // expected lot size under Poisson sampling
  double clip_norm = 1.0;
  double delta = 1e-6;
  int patient_cap = 50;
};

struct TrainSection {
  bool non_dp = true;
  double learning_rate = 1e-2;
  int epochs = 4;
  int batch_size = 16;
  std::optional<DpSweep> dp;
};

struct AttackSection {
  std::vector<AttackKind> attacks;
  std::vector<uint64_t> seeds;
  AttackHyper hyper;
  double train_fraction = 0.2;
  bool write_features = true;
};

struct ReportSection {
  int n_buckets = 5;
  int min_bucket_size = 5;
  int group_k = 50;
};

struct BenchSection {
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<uint64_t> quick_seeds = {1};
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  uint64_t seed = 1;
  CorpusSection corpus;
  std::vector<ModelVariant> models;
  TrainSection train;
  AttackSection attack;
  ReportSection report;
  BenchSection bench;
};

// Parses and validates. Unknown keys anywhere are rejected; every error is
// InvalidArgument and names the offending key path.
absl::StatusOr<ExperimentConfig> ExperimentConfigFromJson(
    const nlohmann::json& j);
nlohmann::json ExperimentConfigToJson(const ExperimentConfig& config);
absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path);

// Cross-field checks (also run by the parser).
absl::Status ValidateExperimentConfig(const ExperimentConfig& config);

// The desk-scale benchmark grid.
ExperimentConfig DefaultBenchConfig();

}  // namespace leakaudit

#endif  // LEAKAUDIT_CONFIG_H_
