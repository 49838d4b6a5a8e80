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

// Checkpoint format: <dir>/checkpoint.json (config, tensor inventory with
// shapes and byte offsets, lineage) next to <dir>/checkpoint.bin, the
// concatenated tensors as little-endian IEEE-754 float32.

#ifndef LEAKAUDIT_CHECKPOINT_H_
#define LEAKAUDIT_CHECKPOINT_H_

#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/model.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

inline constexpr char kCheckpointManifest[] = "checkpoint.json";
inline constexpr char kCheckpointBlob[] = "checkpoint.bin";

nlohmann::json ModelConfigToJson(const ModelConfig& config);
absl::StatusOr<ModelConfig> ModelConfigFromJson(const nlohmann::json& j);

// `lineage` is stored verbatim (seeds, run id, epoch, ...).
absl::Status SaveCheckpoint(const ParameterSet& params, const std::string& dir,
                            const nlohmann::json& lineage);

struct LoadedCheckpoint {
  ParameterSet params;
  nlohmann::json lineage;
};

absl::StatusOr<LoadedCheckpoint> LoadCheckpoint(const std::string& dir);

bool CheckpointExists(const std::string& dir);

}  // namespace leakaudit

#endif  // LEAKAUDIT_CHECKPOINT_H_
