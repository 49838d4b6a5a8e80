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

// Plain minibatch SGD and DP-SGD (Poisson lots, per-sample clipping, Gaussian
// noise) with per-epoch checkpoints and LM-loss evaluation.

#ifndef LEAKAUDIT_TRAINER_H_
#define LEAKAUDIT_TRAINER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/accountant.h"
#include "leakaudit/corpus.h"
#include "leakaudit/model.h"
#include "leakaudit/rng.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

struct DpConfig {
  double clip_norm = 1.0;
  double noise_std = 1.0;  // noise multiplier sigma
  double delta = 1e-6;
  int patient_cap = 50;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 4;
  // Minibatch size for plain SGD.
  int batch_size = 16;
  // Expected lot size under Poisson sampling for DP-SGD.
  int lot_size = 16;
  std::optional<DpConfig> dp;
};

absl::Status ValidateTrainConfig(const TrainConfig& config);

struct AccountantSnapshot {
  double q = 0.0;
  double sigma = 0.0;
  int64_t steps = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  int optimal_order = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::string checkpoint_dir;
  double train_loss = 0.0;
  std::optional<double> test_loss;
  int64_t steps = 0;
  std::optional<AccountantSnapshot> accountant;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::string divergence_message;
};

nlohmann::json TrainLogToJson(const TrainLog& log);
absl::StatusOr<TrainLog> TrainLogFromJson(const nlohmann::json& j);

struct TrainOptions {
  // When non-empty, epoch k is saved under <checkpoint_root>/epoch_<k>/ with
  // its log.json.
  std::string checkpoint_root;
  // Evaluated after every epoch when non-empty.
  std::span<const Sample> eval_samples;
  uint64_t eval_seed = 0;
  nlohmann::json lineage = nlohmann::json::object();
};

// Scales `grad` to global L2 norm `clip_norm` when it exceeds it; gradients
// already within the bound are left untouched. Returns the original norm.
double ClipGradient(GradientSet& grad, double clip_norm);

// theta <- theta - lr * grad.
void ApplyUpdate(ParameterSet& params, const GradientSet& grad, double lr);

// Aggregation and update for one DP-SGD lot: per-sample gradients are clipped
// and summed, N(0, sigma^2 C^2) noise is added per coordinate and the result
// is divided by the expected lot size before the SGD step.
class DpSgdOptimizer {
 public:
  DpSgdOptimizer(const ModelConfig& model, const DpConfig& dp,
                 double learning_rate, double expected_lot_size, Rng noise_rng);

  // Clips `per_sample` in place and adds it to the current lot.
  void Accumulate(GradientSet& per_sample);
  // Noised update of `params`; resets the lot.
  void Step(ParameterSet& params);

  int lot_count() const { return lot_count_; }

 private:
  DpConfig dp_;
  double learning_rate_;
  double expected_lot_size_;
  Rng noise_rng_;
  GradientSet sum_;
  int lot_count_ = 0;
};

// Shuffled minibatch SGD. Deterministic in `seed`.
absl::StatusOr<TrainLog> TrainSgd(ParameterSet& params,
                                  std::span<const Sample> train_samples,
                                  const TrainConfig& config, uint64_t seed,
                                  const TrainOptions& options = {});

// DP-SGD with Poisson lots of rate q = lot_size / N and round(N / lot_size)
// steps per epoch. Empty lots still advance the accountant. The caller applies
// any per-patient cap beforehand.
absl::StatusOr<TrainLog> TrainDpSgd(ParameterSet& params,
                                    std::span<const Sample> train_samples,
                                    const TrainConfig& config, uint64_t seed,
                                    const TrainOptions& options = {});

// Mean SampleError over `samples`; sample i uses the objective seed derived
// from (objective_seed, i).
absl::StatusOr<double> EvaluateLmLoss(const ParameterSet& params,
                                      std::span<const Sample> samples,
                                      uint64_t objective_seed);

uint64_t EvalObjectiveSeed(uint64_t objective_seed, size_t index);

}  // namespace leakaudit

#endif  // LEAKAUDIT_TRAINER_H_
